"""Normalized Rademacher random projection and its transposed recovery.

The projection matrix has i.i.d. entries +-1/sqrt(R) so E[M M^T] = I, which
makes recover(project(H)) an unbiased estimate of H across seeds. Only the
seed is kept; the matrix is regenerated on demand so storing a projector
costs 64 bits, not D*R floats.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import DTYPE, make_rng


@dataclass(frozen=True)
class RademacherProjector:
    d_in: int
    d_out: int
    seed: int

    def __post_init__(self):
        if not 1 <= self.d_out <= self.d_in:
            raise ValueError("need 1 <= d_out <= d_in")

    def matrix(self) -> np.ndarray:
        """Realize the +-1/sqrt(d_out) matrix for this seed."""
        rng = make_rng(self.seed)
        signs = rng.integers(0, 2, size=(self.d_in, self.d_out)).astype(DTYPE)
        return (2.0 * signs - 1.0) / np.sqrt(np.float32(self.d_out))


def project(h: np.ndarray, p: RademacherProjector) -> np.ndarray:
    """H @ M, reducing the trailing dimension from d_in to d_out."""
    h = np.asarray(h)
    if h.ndim != 2 or h.shape[1] != p.d_in:
        raise ValueError(f"expected (*, {p.d_in}) input, got {h.shape}")
    return h @ p.matrix().astype(h.dtype)


def recover(h_proj: np.ndarray, p: RademacherProjector) -> np.ndarray:
    """H_proj @ M^T, the unbiased inverse of project."""
    h_proj = np.asarray(h_proj)
    if h_proj.ndim != 2 or h_proj.shape[1] != p.d_out:
        raise ValueError(f"expected (*, {p.d_out}) input, got {h_proj.shape}")
    return h_proj @ p.matrix().T.astype(h_proj.dtype)
