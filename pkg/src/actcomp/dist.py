"""Clipped-normal model of normalized activations, plus histogram divergence.

The model is a normal with mean B/2 clamped to [0, B], with sigma chosen so
the probability mass clipped onto each boundary is exactly 1/D. Per-row
normalization of a D-column matrix puts one exact 0 and one exact B in every
row, which is precisely what the two 1/D atoms capture.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import Histogram

_SQRT2 = math.sqrt(2.0)
_SQRT2PI = math.sqrt(2.0 * math.pi)

# Acklam's rational approximation for the inverse normal CDF
_A = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
      1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
_B = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
      6.680131188771972e+01, -1.328068155288572e+01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
      -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
      3.754408661907416e+00)
_P_LOW = 0.02425


def std_normal_cdf(x: float) -> float:
    # erfc keeps full relative precision in the tails (no cancellation)
    if x < 0:
        return 0.5 * math.erfc(-x / _SQRT2)
    return 1.0 - 0.5 * math.erfc(x / _SQRT2)


def std_normal_pdf(x: float) -> float:
    return math.exp(-0.5 * x * x) / _SQRT2PI


def std_normal_quantile(p: float) -> float:
    """Inverse standard-normal CDF, accurate to well below 1e-9.

    Rational initial guess refined by one Halley step against the erf-based
    CDF; self-contained so results are stable across library versions.
    """
    if not 0.0 < p < 1.0:
        raise ValueError(f"probability must be in (0, 1), got {p}")
    if p < _P_LOW:
        q = math.sqrt(-2.0 * math.log(p))
        x = (((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]) / \
            ((((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0)
    elif p <= 1.0 - _P_LOW:
        q = p - 0.5
        r = q * q
        x = (((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q / \
            (((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0)
    else:
        q = math.sqrt(-2.0 * math.log(1.0 - p))
        x = -(((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]) / \
            ((((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0)
    err = std_normal_cdf(x) - p
    u = err * _SQRT2PI * math.exp(0.5 * x * x)
    return x - u / (1.0 + 0.5 * x * u)


@dataclass(frozen=True)
class ClippedNormal:
    """Normal(mu, sigma) clamped to [0, B]; atoms sit on the boundaries."""

    levels: int  # B
    mu: float
    sigma: float
    d_param: float | None = None  # boundary-mass parameter D when built from one

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")

    @classmethod
    def from_bits_and_dim(cls, bits: int, d) -> "ClippedNormal":
        mu, sigma = cn_params(bits, d)
        return cls(levels=(1 << bits) - 1, mu=mu, sigma=sigma, d_param=float(d))

    @property
    def clip_mass(self) -> float:
        """Probability mass on each boundary atom."""
        return std_normal_cdf((0.0 - self.mu) / self.sigma)


def cn_params(bits: int, d) -> tuple[float, float]:
    """(mu, sigma) giving boundary atoms of mass 1/d for a 2^bits-1 grid."""
    if d < 3:
        raise ValueError("dimensionality must be >= 3 for a positive sigma")
    mu = ((1 << bits) - 1) / 2.0
    sigma = -mu / std_normal_quantile(1.0 / d)
    return mu, sigma


def cn_pdf(x, dist: ClippedNormal) -> np.ndarray:
    """Density of the continuous part on [0, B]; zero outside.

    The boundary atoms are carried by the CDF, not the density; at exactly
    0 and B this returns the continuous limit so quadrature of the
    continuous part behaves.
    """
    x = np.asarray(x, dtype=np.float64)
    z = (x - dist.mu) / dist.sigma
    dens = np.exp(-0.5 * z * z) / (dist.sigma * _SQRT2PI)
    return np.where((x >= 0) & (x <= dist.levels), dens, 0.0)


def cn_cdf(x, dist: ClippedNormal) -> np.ndarray:
    """CDF including the boundary atoms: cdf(0) is the left clip mass."""
    x = np.asarray(x, dtype=np.float64)
    z = (x - dist.mu) / dist.sigma
    base = 0.5 * (1.0 + np.vectorize(math.erf)(z / _SQRT2))
    out = np.where(x < 0, 0.0, np.where(x >= dist.levels, 1.0, base))
    return out if out.shape else float(out)


def cn_sample(dist: ClippedNormal, n: int, rng: np.random.Generator) -> np.ndarray:
    """n draws: sample the normal and clamp to [0, B]."""
    if n < 0:
        raise ValueError("sample count must be >= 0")
    return np.clip(rng.normal(dist.mu, dist.sigma, size=n), 0.0, float(dist.levels))


def cn_bin_masses(dist: ClippedNormal, edges) -> np.ndarray:
    """Model probability mass per histogram bin; atoms land in the end bins."""
    edges = np.asarray(edges, dtype=np.float64)
    cdf = np.atleast_1d(cn_cdf(edges, dist)).astype(np.float64)
    if edges[0] == 0.0:
        cdf[0] = 0.0  # the atom at 0 belongs inside the first bin
    return np.diff(cdf)


def uniform_bin_masses(edges, levels: int) -> np.ndarray:
    """Mass per bin under a uniform density on [0, B]."""
    edges = np.asarray(edges, dtype=np.float64)
    clipped = np.clip(edges, 0.0, float(levels))
    return np.diff(clipped) / float(levels)


def jsd_masses(p, q) -> float:
    """Jensen-Shannon divergence (natural log) between two mass vectors."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise ValueError("mass vectors must have the same shape")
    p = p / p.sum()
    q = q / q.sum()
    m = 0.5 * (p + q)

    def kl(a):
        nz = a > 0
        return float(np.sum(a[nz] * np.log(a[nz] / m[nz])))

    return 0.5 * kl(p) + 0.5 * kl(q)


def js_divergence(p: Histogram, q: Histogram) -> float:
    """JSD between two histograms sharing the same bin edges."""
    if not np.array_equal(p.edges, q.edges):
        raise ValueError("histograms must share identical bin edges")
    return jsd_masses(p.density(), q.density())


def fit_cn_to_activations(h_proj_norm: np.ndarray, bits: int = 2) -> ClippedNormal:
    """Model a per-row-normalized R-column matrix as a clipped normal.

    The boundary-mass parameter is the column count: normalizing each row of
    R values puts mass exactly 1/R on each of 0 and B, so the matching model
    has atoms of the same size.
    """
    h = np.asarray(h_proj_norm)
    if h.ndim != 2:
        raise ValueError("expected a 2-D normalized activation matrix")
    return ClippedNormal.from_bits_and_dim(bits, h.shape[1])
