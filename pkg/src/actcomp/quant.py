"""Stochastic-rounding quantization to sub-byte integer codes.

A value vector is normalized per group (row or fixed-size block) to [0, B]
with B = 2^b - 1, stochastically rounded to an integer code, and bit-packed.
Rounding is unbiased for both uniform bins and explicit non-uniform bin
edges; dequantization maps code k back to the k-th edge of the normalized
grid (the integers 0..B in the uniform case).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .core import DTYPE

SUPPORTED_BITS = (2, 4, 8)
BOUND_TOL = 1e-6

MAGIC = b"AQT1"
GROUPING_PER_ROW = 0
GROUPING_BLOCK = 1
HEADER_SIZE = 4 + 6 * 4  # magic + six u32 fields


@dataclass(frozen=True)
class QuantScheme:
    """Bit width, grouping mode and bin boundaries for one quantizer.

    block_size None means per-row grouping. inner_edges None means uniform
    integer bins; otherwise it holds the B-1 interior edges, strictly
    increasing inside (0, B).
    """

    bits: int
    block_size: int | None = None
    inner_edges: np.ndarray | None = None

    def __post_init__(self):
        if self.bits not in SUPPORTED_BITS:
            raise ValueError(f"bits must be one of {SUPPORTED_BITS}, got {self.bits}")
        if self.block_size is not None and self.block_size < 1:
            raise ValueError("block size must be >= 1")
        if self.inner_edges is not None:
            edges = np.asarray(self.inner_edges, dtype=np.float64)
            if edges.shape != (self.levels - 1,):
                raise ValueError(f"expected {self.levels - 1} interior edges, got shape {edges.shape}")
            if np.any(np.diff(edges) <= 0) or edges[0] <= 0 or edges[-1] >= self.levels:
                raise ValueError("interior edges must be strictly increasing inside (0, B)")
            object.__setattr__(self, "inner_edges", edges)

    @property
    def levels(self) -> int:
        """Largest code value B = 2^bits - 1."""
        return (1 << self.bits) - 1

    @property
    def full_edges(self) -> np.ndarray:
        """All B+1 bin edges on the normalized grid, including 0 and B."""
        if self.inner_edges is None:
            return np.arange(self.levels + 1, dtype=np.float64)
        return np.concatenate(([0.0], self.inner_edges, [float(self.levels)]))

    @property
    def is_blockwise(self) -> bool:
        return self.block_size is not None


def _check_bounds(h: np.ndarray, upper: float) -> np.ndarray:
    if h.size and (h.min() < -BOUND_TOL or h.max() > upper + BOUND_TOL):
        raise ValueError(f"normalized values must lie in [0, {upper}] (tolerance {BOUND_TOL})")
    return np.clip(h, 0.0, upper)


def sr_uniform(h_norm, levels: int, rng: np.random.Generator) -> np.ndarray:
    """Stochastically round values in [0, levels] to integer codes.

    Rounds up with probability equal to the fractional part, so the result
    is unbiased. Exact integers are returned unchanged.
    """
    h = _check_bounds(np.asarray(h_norm, dtype=np.float64), float(levels))
    lo = np.floor(h)
    frac = h - lo
    codes = lo + (rng.random(h.shape) < frac)
    return codes.astype(np.int64)


def sr_nonuniform(h_norm, edges, rng: np.random.Generator) -> np.ndarray:
    """Stochastic rounding onto an explicit edge grid.

    `edges` is the full sorted list alpha_0=0 .. alpha_B=B. A value inside
    bin i (edges alpha_{i-1}, alpha_i of width delta_i) becomes code i with
    probability (h - alpha_{i-1}) / delta_i and code i-1 otherwise; values
    sitting exactly on an edge keep that edge's code deterministically.
    """
    edges = np.asarray(edges, dtype=np.float64)
    if edges.ndim != 1 or edges.size < 2 or np.any(np.diff(edges) <= 0):
        raise ValueError("edges must be strictly increasing with length >= 2")
    if edges[0] != 0.0:
        raise ValueError("first edge must be 0")
    levels = edges.size - 1
    if edges[-1] != float(levels):
        raise ValueError(f"last edge must equal the code count B={levels}")
    h = _check_bounds(np.asarray(h_norm, dtype=np.float64), edges[-1])
    # bin index in 1..B; values at h == B fall into the last bin
    bin_idx = np.clip(np.searchsorted(edges, h, side="right"), 1, levels)
    lo_edge = edges[bin_idx - 1]
    width = edges[bin_idx] - lo_edge
    p_up = (h - lo_edge) / width
    codes = bin_idx - 1 + (rng.random(h.shape) < p_up)
    return codes.astype(np.int64)


def stochastic_round(h_norm, scheme: QuantScheme, rng: np.random.Generator) -> np.ndarray:
    if scheme.inner_edges is None:
        return sr_uniform(h_norm, scheme.levels, rng)
    return sr_nonuniform(h_norm, scheme.full_edges, rng)


def code_values(codes, scheme: QuantScheme) -> np.ndarray:
    """Normalized-grid value each code dequantizes to (alpha_k for code k)."""
    codes = np.asarray(codes)
    if scheme.inner_edges is None:
        return codes.astype(np.float64)
    return scheme.full_edges[codes]


def quantize_row(h, scheme: QuantScheme, rng: np.random.Generator):
    """Quantize one vector: returns (codes, zero_point, range).

    zero_point is min(h) and range is max(h) - min(h); a constant vector
    stores range 0 and all-zero codes so the round trip is exact.
    """
    h = np.asarray(h, dtype=DTYPE)
    if h.size == 0:
        raise ValueError("cannot quantize an empty vector")
    if not np.all(np.isfinite(h)):
        raise ValueError("input contains NaN or Inf")
    # normalize in float64 so max lands on exactly B; metadata is stored
    # at float32 precision
    h64 = h.astype(np.float64)
    z = h64.min()
    r = h64.max() - z
    if r == 0:
        return np.zeros(h.shape, dtype=np.int64), float(z), 0.0
    h_norm = (h64 - z) / r * scheme.levels
    return stochastic_round(h_norm, scheme, rng), float(DTYPE(z)), float(DTYPE(r))


def dequantize_row(codes, z: float, r: float, scheme: QuantScheme) -> np.ndarray:
    """Map codes back to values: r * value(code) / B + z."""
    vals = code_values(codes, scheme)
    return (vals * (r / scheme.levels) + z).astype(DTYPE)


def pack_codes(codes, bits: int) -> bytes:
    """Pack integer codes little-endian within each byte, b bits per code."""
    if bits not in SUPPORTED_BITS:
        raise ValueError(f"bits must be one of {SUPPORTED_BITS}")
    codes = np.asarray(codes, dtype=np.int64).ravel()
    if codes.size and (codes.min() < 0 or codes.max() >= (1 << bits)):
        raise ValueError(f"codes out of range for {bits}-bit packing")
    per_byte = 8 // bits
    n = codes.size
    padded = np.zeros(-(-n // per_byte) * per_byte, dtype=np.uint64)
    padded[:n] = codes.astype(np.uint64)
    shifts = (np.arange(per_byte, dtype=np.uint64) * np.uint64(bits))
    grouped = padded.reshape(-1, per_byte) << shifts
    return (grouped.sum(axis=1).astype(np.uint8)).tobytes()


def unpack_codes(data: bytes, bits: int, count: int) -> np.ndarray:
    """Inverse of pack_codes; `count` recovers the unpadded length."""
    if bits not in SUPPORTED_BITS:
        raise ValueError(f"bits must be one of {SUPPORTED_BITS}")
    per_byte = 8 // bits
    if count > len(data) * per_byte:
        raise ValueError("byte buffer too short for requested count")
    raw = np.frombuffer(data, dtype=np.uint8).astype(np.uint16)
    shifts = np.arange(per_byte) * bits
    mask = (1 << bits) - 1
    codes = ((raw[:, None] >> shifts) & mask).reshape(-1)
    return codes[:count].astype(np.int64)


@dataclass(frozen=True)
class PackedQuantTensor:
    """Bit-packed codes plus per-group (zero_point, range) metadata."""

    data: bytes  # packed codes, row-major element order
    zero_points: np.ndarray  # float32 (num_groups,)
    ranges: np.ndarray  # float32 (num_groups,)
    shape: tuple[int, int]
    scheme: QuantScheme

    def __post_init__(self):
        zp = np.asarray(self.zero_points, dtype=DTYPE)
        rg = np.asarray(self.ranges, dtype=DTYPE)
        if zp.shape != rg.shape or zp.ndim != 1:
            raise ValueError("zero_points and ranges must be matching 1-D arrays")
        if np.any(rg < 0):
            raise ValueError("group range must be non-negative")
        expected = self.num_groups_for(self.shape, self.scheme)
        if zp.size != expected:
            raise ValueError(f"expected {expected} groups, got {zp.size}")
        object.__setattr__(self, "zero_points", zp)
        object.__setattr__(self, "ranges", rg)

    @staticmethod
    def num_groups_for(shape: tuple[int, int], scheme: QuantScheme) -> int:
        rows, cols = shape
        if scheme.is_blockwise:
            return -(-(rows * cols) // scheme.block_size)
        return rows

    @property
    def num_elements(self) -> int:
        return self.shape[0] * self.shape[1]

    def codes(self) -> np.ndarray:
        return unpack_codes(self.data, self.scheme.bits, self.num_elements)


def quantize_rows(h: np.ndarray, scheme: QuantScheme, rng: np.random.Generator) -> PackedQuantTensor:
    """Per-row quantization of a 2-D matrix into one packed tensor."""
    if scheme.is_blockwise:
        raise ValueError("scheme has block grouping; use quantize_blockwise")
    h = np.asarray(h, dtype=DTYPE)
    if h.ndim != 2:
        raise ValueError("expected a 2-D matrix")
    h64 = h.astype(np.float64)
    z = h64.min(axis=1)
    r = h64.max(axis=1) - z
    safe_r = np.where(r > 0, r, 1.0)
    h_norm = (h64 - z[:, None]) / safe_r[:, None] * scheme.levels
    h_norm[r == 0] = 0.0
    codes = stochastic_round(h_norm.ravel(), scheme, rng)
    return PackedQuantTensor(
        data=pack_codes(codes, scheme.bits),
        zero_points=z.astype(DTYPE),
        ranges=r.astype(DTYPE),
        shape=h.shape,
        scheme=scheme,
    )


def dequantize_rows(p: PackedQuantTensor) -> np.ndarray:
    if p.scheme.is_blockwise:
        raise ValueError("tensor has block grouping; use dequantize_blockwise")
    vals = code_values(p.codes(), p.scheme).reshape(p.shape)
    r = p.ranges.astype(np.float64)[:, None]
    z = p.zero_points.astype(np.float64)[:, None]
    return (vals * (r / p.scheme.levels) + z).astype(DTYPE)


def serialize(p: PackedQuantTensor) -> bytes:
    """Binary container: header, interleaved (Z, r) float32 pairs, code bytes.

    Header fields are little-endian u32: bits, grouping mode, block size
    (0 for per-row), rows, cols, group count. Explicit bin edges are not
    part of the container; the consumer supplies them on deserialize.
    """
    mode = GROUPING_BLOCK if p.scheme.is_blockwise else GROUPING_PER_ROW
    g = p.scheme.block_size if p.scheme.is_blockwise else 0
    header = MAGIC + struct.pack(
        "<6I", p.scheme.bits, mode, g, p.shape[0], p.shape[1], p.zero_points.size
    )
    meta = np.empty(2 * p.zero_points.size, dtype="<f4")
    meta[0::2] = p.zero_points
    meta[1::2] = p.ranges
    return header + meta.tobytes() + p.data


def deserialize(blob: bytes, inner_edges=None) -> PackedQuantTensor:
    """Parse a serialized tensor; pass inner_edges to restore explicit bins."""
    if len(blob) < HEADER_SIZE or blob[:4] != MAGIC:
        raise ValueError("bad magic or truncated header")
    bits, mode, g, rows, cols, n_groups = struct.unpack("<6I", blob[4:HEADER_SIZE])
    if mode not in (GROUPING_PER_ROW, GROUPING_BLOCK):
        raise ValueError(f"unknown grouping mode {mode}")
    scheme = QuantScheme(
        bits=bits,
        block_size=g if mode == GROUPING_BLOCK else None,
        inner_edges=inner_edges,
    )
    meta_bytes = 8 * n_groups
    code_bytes = -(-rows * cols * bits // 8)
    if len(blob) != HEADER_SIZE + meta_bytes + code_bytes:
        raise ValueError("container length does not match header")
    meta = np.frombuffer(blob, dtype="<f4", count=2 * n_groups, offset=HEADER_SIZE)
    return PackedQuantTensor(
        data=blob[HEADER_SIZE + meta_bytes:],
        zero_points=meta[0::2].copy(),
        ranges=meta[1::2].copy(),
        shape=(rows, cols),
        scheme=scheme,
    )
