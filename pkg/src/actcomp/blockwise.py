"""Block-wise grouping: quantization statistics over fixed-size chunks.

Grouping G values at a time (row-major over the flattened matrix, so blocks
may span row boundaries) amortizes the per-group metadata and keeps an
outlier's range inflation inside its own block. A final short block is kept
as-is rather than padded, so tail statistics are not biased by synthetic
zeros.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import DTYPE
from .quant import (
    HEADER_SIZE,
    PackedQuantTensor,
    QuantScheme,
    code_values,
    pack_codes,
    stochastic_round,
)


@dataclass(frozen=True)
class BlockView:
    """Index bookkeeping for a matrix flattened into length-G blocks."""

    source_shape: tuple[int, int]
    block_size: int

    @property
    def num_elements(self) -> int:
        return self.source_shape[0] * self.source_shape[1]

    @property
    def num_blocks(self) -> int:
        return -(-self.num_elements // self.block_size)

    @property
    def tail_len(self) -> int:
        return self.num_elements % self.block_size


def reshape_blocks(h: np.ndarray, block_size: int) -> tuple[BlockView, np.ndarray]:
    """Row-major flatten into contiguous blocks; returns (view, flat values)."""
    if block_size < 1:
        raise ValueError("block size must be >= 1")
    h = np.asarray(h)
    if h.ndim != 2:
        raise ValueError("expected a 2-D matrix")
    return BlockView(source_shape=h.shape, block_size=block_size), h.ravel()


def unreshape_blocks(view: BlockView, flat: np.ndarray) -> np.ndarray:
    """Inverse of reshape_blocks."""
    if flat.size != view.num_elements:
        raise ValueError("flat length does not match the block view")
    return flat.reshape(view.source_shape)


def _normalize_segment(seg64: np.ndarray, levels: int):
    """Rows of a (blocks, G) view onto [0, levels]; returns (z, r, normalized)."""
    z = seg64.min(axis=1)
    r = seg64.max(axis=1) - z
    safe = np.where(r > 0, r, 1.0)
    norm = (seg64 - z[:, None]) / safe[:, None] * levels
    norm[r == 0] = 0.0
    return z, r, norm


def quantize_blockwise(h: np.ndarray, scheme: QuantScheme, rng: np.random.Generator) -> PackedQuantTensor:
    """Quantize with per-block zero point and range."""
    if not scheme.is_blockwise:
        raise ValueError("scheme must have block grouping")
    h = np.asarray(h, dtype=DTYPE)
    g = scheme.block_size
    view, flat = reshape_blocks(h, g)
    flat64 = flat.astype(np.float64)
    n_full = flat64.size // g
    h_norm = np.empty(flat64.size)
    if n_full:
        z, r, norm_main = _normalize_segment(flat64[: n_full * g].reshape(n_full, g), scheme.levels)
        h_norm[: n_full * g] = norm_main.ravel()
    else:
        z = np.empty(0)
        r = np.empty(0)
    tail = flat64[n_full * g:]
    if tail.size:
        zt, rt, norm_tail = _normalize_segment(tail[None, :], scheme.levels)
        h_norm[n_full * g:] = norm_tail[0]
        z = np.append(z, zt)
        r = np.append(r, rt)
    codes = stochastic_round(h_norm, scheme, rng)
    return PackedQuantTensor(
        data=pack_codes(codes, scheme.bits),
        zero_points=z.astype(DTYPE),
        ranges=r.astype(DTYPE),
        shape=h.shape,
        scheme=scheme,
    )


def dequantize_blockwise(p: PackedQuantTensor) -> np.ndarray:
    """Recover a float32 matrix in the original shape."""
    if not p.scheme.is_blockwise:
        raise ValueError("tensor has per-row grouping; use dequantize_rows")
    g = p.scheme.block_size
    vals = code_values(p.codes(), p.scheme)
    z = p.zero_points.astype(np.float64)
    r = p.ranges.astype(np.float64)
    n_full = vals.size // g
    flat = np.empty(vals.size)
    if n_full:
        main = vals[: n_full * g].reshape(n_full, g)
        flat[: n_full * g] = (main * (r[:n_full, None] / p.scheme.levels)
                              + z[:n_full, None]).ravel()
    if vals.size > n_full * g:
        flat[n_full * g:] = vals[n_full * g:] * (r[-1] / p.scheme.levels) + z[-1]
    view = BlockView(source_shape=p.shape, block_size=g)
    return unreshape_blocks(view, flat.astype(DTYPE))


@dataclass(frozen=True)
class MemoryReport:
    """Exact bit accounting for one stored activation matrix."""

    code_bits: int
    metadata_bits: int
    num_elements: int

    @property
    def total_bits(self) -> int:
        return self.code_bits + self.metadata_bits

    @property
    def bytes(self) -> int:
        # matches the serialized payload: codes are packed contiguously,
        # metadata is 8 bytes per group
        return -(-self.code_bits // 8) + self.metadata_bits // 8

    @property
    def ratio_vs_fp32(self) -> float:
        return self.total_bits / (32 * self.num_elements)

    def as_dict(self) -> dict:
        return {
            "code_bits": self.code_bits,
            "metadata_bits": self.metadata_bits,
            "total_bits": self.total_bits,
            "bytes": self.bytes,
            "ratio_vs_fp32": self.ratio_vs_fp32,
        }


def memory_report(n: int, r_dim: int, scheme: QuantScheme | None) -> MemoryReport:
    """Storage model for an n x r_dim matrix under the given scheme.

    scheme None is the uncompressed float32 baseline (no metadata).
    """
    if n < 1 or r_dim < 1:
        raise ValueError("matrix dimensions must be >= 1")
    elems = n * r_dim
    if scheme is None:
        return MemoryReport(code_bits=32 * elems, metadata_bits=0, num_elements=elems)
    groups = PackedQuantTensor.num_groups_for((n, r_dim), scheme)
    return MemoryReport(
        code_bits=elems * scheme.bits,
        metadata_bits=groups * 2 * 32,
        num_elements=elems,
    )


def serialized_size(n: int, r_dim: int, scheme: QuantScheme) -> int:
    """Exact byte length serialize() produces for an n x r_dim tensor."""
    return HEADER_SIZE + memory_report(n, r_dim, scheme).bytes
