"""Shared primitives: dense/sparse matrix helpers, seeded RNG, histograms.

All floating tensor state is float32, row-major. Analytic/numeric helper
code elsewhere is free to use float64 internally.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DTYPE = np.float32


def dense_matrix(data, dtype=DTYPE) -> np.ndarray:
    """Validate and convert external input to a 2-D row-major float matrix.

    Rejects non-finite entries; accepts anything np.asarray handles.
    """
    m = np.ascontiguousarray(np.asarray(data, dtype=dtype))
    if m.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got ndim={m.ndim}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix contains NaN or Inf entries")
    return m


def make_rng(seed: int) -> np.random.Generator:
    """Deterministic generator: same seed gives the same stream on any platform."""
    return np.random.Generator(np.random.PCG64(np.uint64(seed)))


def derive_seed(master_seed: int, *tags: int) -> int:
    """Stable 64-bit child seed for an independent substream.

    Children with distinct tags are statistically independent of each other
    and of the master stream.
    """
    ss = np.random.SeedSequence([int(master_seed), *[int(t) for t in tags]])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@dataclass(frozen=True)
class SparseAdjacency:
    """Weighted sparse adjacency in COO form.

    Edges are directed pairs; a symmetric graph stores both directions.
    """

    n: int
    rows: np.ndarray  # int64 (nnz,)
    cols: np.ndarray  # int64 (nnz,)
    values: np.ndarray  # float32 (nnz,)

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.int64)
        cols = np.asarray(self.cols, dtype=np.int64)
        values = np.asarray(self.values, dtype=DTYPE)
        if not (rows.shape == cols.shape == values.shape) or rows.ndim != 1:
            raise ValueError("rows, cols, values must be 1-D arrays of equal length")
        if self.n < 1:
            raise ValueError("adjacency needs at least one node")
        if rows.size and (rows.min() < 0 or rows.max() >= self.n or cols.min() < 0 or cols.max() >= self.n):
            raise ValueError("edge index out of range")
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "cols", cols)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_edges(cls, n: int, edges, values=None) -> "SparseAdjacency":
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if values is None:
            values = np.ones(len(edges), dtype=DTYPE)
        return cls(n=n, rows=edges[:, 0], cols=edges[:, 1], values=np.asarray(values, dtype=DTYPE))

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.n, self.n), dtype=DTYPE)
        np.add.at(out, (self.rows, self.cols), self.values)
        return out

    def transpose(self) -> "SparseAdjacency":
        return SparseAdjacency(n=self.n, rows=self.cols, cols=self.rows, values=self.values)


def normalize_adjacency(a: SparseAdjacency) -> SparseAdjacency:
    """Symmetric degree normalization with self-loops added exactly once.

    Returns D^{-1/2} (A + I) D^{-1/2} where D is the degree matrix of A + I.
    Duplicate edges (including pre-existing self-loops) are summed before the
    self-loop insertion is deduped, so every node ends up with degree >= 1.
    """
    if np.any(a.values < 0):
        raise ValueError("negative edge weights are not allowed")
    # collapse duplicates, drop input self-loops, then add unit self-loops
    off = a.rows != a.cols
    keys = a.rows[off] * a.n + a.cols[off]
    order = np.argsort(keys, kind="stable")
    keys, rows, cols, vals = keys[order], a.rows[off][order], a.cols[off][order], a.values[off][order]
    if keys.size:
        uniq, start = np.unique(keys, return_index=True)
        summed = np.add.reduceat(vals.astype(np.float64), start)
        rows, cols, vals = rows[start], cols[start], summed
    loop_idx = np.arange(a.n, dtype=np.int64)
    rows = np.concatenate([rows, loop_idx])
    cols = np.concatenate([cols, loop_idx])
    vals = np.concatenate([np.asarray(vals, dtype=np.float64), np.ones(a.n)])

    deg = np.zeros(a.n, dtype=np.float64)
    np.add.at(deg, rows, vals)
    inv_sqrt = 1.0 / np.sqrt(deg)
    out_vals = (vals * inv_sqrt[rows] * inv_sqrt[cols]).astype(DTYPE)
    return SparseAdjacency(n=a.n, rows=rows, cols=cols, values=out_vals)


def spmm(a: SparseAdjacency, h: np.ndarray) -> np.ndarray:
    """Sparse-dense product A @ H, exact in the accumulation dtype of H."""
    if h.ndim != 2 or h.shape[0] != a.n:
        raise ValueError(f"shape mismatch: adjacency has {a.n} nodes, H has shape {h.shape}")
    out = np.zeros((a.n, h.shape[1]), dtype=h.dtype)
    np.add.at(out, a.rows, a.values.astype(h.dtype)[:, None] * h[a.cols])
    return out


@dataclass(frozen=True)
class Histogram:
    """Bin counts over half-open bins [e_i, e_{i+1}), final bin closed.

    Out-of-range values are tallied separately, never dropped.
    """

    edges: np.ndarray
    counts: np.ndarray
    underflow: int = 0
    overflow: int = 0

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=np.float64)
        counts = np.asarray(self.counts, dtype=np.int64)
        if edges.ndim != 1 or edges.size < 2 or np.any(np.diff(edges) <= 0):
            raise ValueError("edges must be a strictly increasing 1-D array of length >= 2")
        if counts.shape != (edges.size - 1,) or np.any(counts < 0):
            raise ValueError("counts must be non-negative with len(edges) - 1 entries")
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "counts", counts)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def density(self) -> np.ndarray:
        """In-range probability mass per bin (sums to 1)."""
        t = self.total
        if t == 0:
            raise ValueError("histogram is empty")
        return self.counts / t


def build_histogram(values, edges) -> Histogram:
    """Histogram of `values` over the given strictly increasing edges."""
    values = np.asarray(values, dtype=np.float64).ravel()
    edges = np.asarray(edges, dtype=np.float64)
    if edges.ndim != 1 or edges.size < 2 or np.any(np.diff(edges) <= 0):
        raise ValueError("edges must be strictly increasing with length >= 2")
    under = int(np.count_nonzero(values < edges[0]))
    over = int(np.count_nonzero(values > edges[-1]))
    in_range = values[(values >= edges[0]) & (values <= edges[-1])]
    counts, _ = np.histogram(in_range, bins=edges)
    return Histogram(edges=edges, counts=counts, underflow=under, overflow=over)
