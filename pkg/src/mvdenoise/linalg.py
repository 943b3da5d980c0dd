"""Small dense symmetric kernels: covariance, Mahalanobis norm, local
polynomial fits and per-mode PCA.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property, lru_cache

import numpy as np
from scipy.linalg import cho_factor, solve_triangular

from .errors import DataError, NumericalError
from .signal import MultichannelSignal, as_signal

__all__ = [
    "CovarianceMatrix",
    "PcaResult",
    "RIDGE_EPS",
    "covariance",
    "as_covariance",
    "mahalanobis_norm",
    "quad_polyfit",
    "polyfit_local",
    "detrend_operator",
    "robust_noise_covariance",
    "pca_select",
    "pca_project",
]

RIDGE_EPS = 1e-10
MAX_CONDITION = 1e12


@dataclass(frozen=True, eq=False)
class CovarianceMatrix:
    """Symmetric positive-definite m x m matrix with a lazily cached
    Cholesky factor.

    ``ridge`` is the multiple of the identity added to the raw estimate; it is
    zero unless ``regularization_applied`` is set.
    """

    entries: np.ndarray
    regularization_applied: bool = False
    condition_estimate: float = 1.0
    ridge: float = 0.0
    _raw: np.ndarray | None = field(default=None, repr=False)

    @property
    def m(self) -> int:
        return self.entries.shape[0]

    @property
    def raw(self) -> np.ndarray:
        """The estimate before any ridge was added."""
        return self.entries if self._raw is None else self._raw

    @cached_property
    def cholesky(self) -> np.ndarray:
        """Lower-triangular L with ``L @ L.T == entries``."""
        try:
            c, _ = cho_factor(self.entries, lower=True, check_finite=False)
        except np.linalg.LinAlgError as exc:
            raise NumericalError(f"covariance is not positive definite: {exc}") from None
        return np.tril(c)

    def whiten(self, z: np.ndarray) -> np.ndarray:
        """Return ``L^{-1} z`` for vectors stored along the last axis."""
        z = np.asarray(z, dtype=float)
        flat = z.reshape(-1, self.m).T
        w = solve_triangular(self.cholesky, flat, lower=True, check_finite=False)
        return w.T.reshape(z.shape)


def _condition(vals: np.ndarray) -> float:
    lo, hi = vals.min(), vals.max()
    if lo <= 0:
        return np.inf
    return float(hi / lo)


def _finalize(raw: np.ndarray) -> CovarianceMatrix:
    raw = (raw + raw.T) / 2
    vals = np.linalg.eigvalsh(raw)
    cond = _condition(vals)
    if cond <= MAX_CONDITION:
        raw.setflags(write=False)
        return CovarianceMatrix(raw, False, cond)
    m = raw.shape[0]
    ridge = RIDGE_EPS * np.trace(raw) / m
    if not ridge > 0:
        raise NumericalError("covariance has zero trace; cannot regularize")
    entries = raw + ridge * np.eye(m)
    entries.setflags(write=False)
    raw.setflags(write=False)
    return CovarianceMatrix(entries, True, _condition(vals + ridge), float(ridge), raw)


def covariance(rows) -> CovarianceMatrix:
    """Unbiased sample covariance of the rows, ridge-regularized when needed.

    If the condition estimate exceeds 1e12 (or the matrix is singular), a
    ridge of ``1e-10 * trace / m`` is added to the diagonal.
    """
    x = np.asarray(rows, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2:
        raise DataError(f"covariance needs a 2-D array of rows, got {x.ndim} dimensions")
    if x.shape[0] < 2:
        raise DataError(f"covariance needs at least 2 rows, got {x.shape[0]}")
    if not np.all(np.isfinite(x)):
        raise DataError("covariance input contains NaN or Inf")
    xc = x - x.mean(axis=0)
    return _finalize(xc.T @ xc / (x.shape[0] - 1))


def as_covariance(sigma) -> CovarianceMatrix:
    """Validate a user-supplied matrix (or pass a CovarianceMatrix through)."""
    if isinstance(sigma, CovarianceMatrix):
        return sigma
    s = np.array(sigma, dtype=float)
    if s.ndim != 2 or s.shape[0] != s.shape[1]:
        raise DataError(f"covariance must be square, got shape {s.shape}")
    if not np.all(np.isfinite(s)):
        raise DataError("covariance contains NaN or Inf")
    scale = max(np.abs(s).max(), np.finfo(float).tiny)
    if np.abs(s - s.T).max() > 1e-12 * scale:
        raise DataError("covariance is not symmetric")
    return _finalize(s)


def mahalanobis_norm(z, sigma) -> float | np.ndarray:
    """``sqrt(z^T Sigma^{-1} z)`` via a Cholesky solve.

    ``z`` may be a single m-vector or an array of vectors along the last axis;
    the result has the leading shape of ``z``.
    """
    cov = as_covariance(sigma)
    z = np.asarray(z, dtype=float)
    if z.shape[-1:] != (cov.m,):
        raise DataError(f"vector dimension {z.shape[-1:]} does not match {cov.m}x{cov.m} covariance")
    w = cov.whiten(z)
    out = np.sqrt(np.sum(w * w, axis=-1))
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# Local polynomial trend


def _vandermonde(s: int, order: int) -> np.ndarray:
    i = np.arange(1, s + 1, dtype=float)
    return np.vander(i, order + 1)


def polyfit_local(values, order: int = 2):
    """Least-squares polynomial in the local index ``i = 1..s``.

    Returns ``(coefficients, fitted)`` with coefficients highest power first.
    """
    y = np.asarray(values, dtype=float)
    if y.ndim != 1:
        raise DataError("polyfit_local expects a 1-D vector")
    if order < 0:
        raise DataError(f"polynomial order must be >= 0, got {order}")
    if y.size < order + 1:
        raise DataError(f"need at least {order + 1} samples for an order-{order} fit, got {y.size}")
    a = _vandermonde(y.size, order)
    coef, *_ = np.linalg.lstsq(a, y, rcond=None)
    return coef, a @ coef


def quad_polyfit(values):
    """Quadratic trend ``a*i**2 + b*i + c``; returns ``((a, b, c), fitted)``."""
    coef, fitted = polyfit_local(values, 2)
    return tuple(float(c) for c in coef), fitted


@lru_cache(maxsize=128)
def detrend_operator(s: int, order: int = 2) -> np.ndarray:
    """Symmetric s x s matrix mapping a segment to its fit residual."""
    if s < order + 1:
        raise DataError(f"segment length {s} too short for an order-{order} fit")
    q, _ = np.linalg.qr(_vandermonde(s, order))
    op = np.eye(s) - q @ q.T
    op.setflags(write=False)
    return op


# ---------------------------------------------------------------------------
# PCA


_MAD_TO_STD = 0.6744897501960817


def _robust_scale(v: np.ndarray) -> float:
    return float(np.median(np.abs(v - np.median(v))) / _MAD_TO_STD)


def robust_noise_covariance(signal) -> np.ndarray:
    """Covariance of additive white noise, estimated from first differences.

    Differencing suppresses smooth signal content; ``diff / sqrt(2)`` of white
    noise keeps the noise covariance. Scales come from the median absolute
    deviation and cross terms from the Gnanadesikan-Kettenring identity
    ``cov(a, b) = (s(a + b)**2 - s(a - b)**2) / 4`` on standardized channels,
    so isolated jumps in the signal do not inflate the estimate.
    """
    x = np.asarray(as_signal(signal))
    if x.shape[0] < 3:
        raise DataError("noise estimate needs at least 3 samples")
    d = np.diff(x, axis=0) / np.sqrt(2.0)
    m = d.shape[1]
    scale = np.array([_robust_scale(d[:, j]) for j in range(m)])
    cov = np.diag(scale**2)
    for i in range(m):
        for j in range(i + 1, m):
            if scale[i] == 0 or scale[j] == 0:
                continue
            a, b = d[:, i] / scale[i], d[:, j] / scale[j]
            rho = (_robust_scale(a + b) ** 2 - _robust_scale(a - b) ** 2) / 4
            cov[i, j] = cov[j, i] = scale[i] * scale[j] * np.clip(rho, -1.0, 1.0)
    return cov


@dataclass(frozen=True, eq=False)
class PcaResult:
    """Eigenvalues (non-increasing), matching orthonormal eigenvector columns
    and the mask of retained components."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    retained: np.ndarray
    thresholds: np.ndarray

    @property
    def m(self) -> int:
        return self.eigenvalues.size

    @property
    def retained_count(self) -> int:
        return int(np.count_nonzero(self.retained))


def pca_select(mode, noise_cov=None) -> PcaResult:
    """Eigendecompose a mode's channel covariance and pick components.

    A component is kept when its eigenvalue exceeds
    ``ref * (1 + 2*sqrt((m - 1)/(N - 1)))``. Without ``noise_cov`` the
    reference is the mean eigenvalue. With it, each component is compared
    against the noise variance along its own direction, ``v^T noise_cov v``,
    so only directions that stand out from the noise floor survive. The
    largest component is always kept.
    """
    x = np.asarray(as_signal(mode))
    n, m = x.shape
    if n < 2:
        raise DataError(f"PCA needs at least 2 samples, got {n}")
    if n < m:
        raise DataError(f"PCA needs N >= m, got N={n}, m={m}")
    xc = x - x.mean(axis=0)
    cov = xc.T @ xc / (n - 1)
    vals, vecs = np.linalg.eigh((cov + cov.T) / 2)
    order = np.argsort(vals)[::-1]
    vals = np.clip(vals[order], 0.0, None)
    vecs = vecs[:, order]
    factor = 1 + 2 * np.sqrt((m - 1) / (n - 1))
    if noise_cov is None:
        ref = np.full(m, vals.mean())
    else:
        noise_cov = np.asarray(noise_cov, dtype=float)
        if noise_cov.shape != (m, m):
            raise DataError(f"noise covariance must be {m}x{m}, got {noise_cov.shape}")
        ref = np.einsum("ij,ik,kj->j", vecs, noise_cov, vecs)
    thresholds = ref * factor
    keep = vals > thresholds
    keep[0] = True
    return PcaResult(vals, vecs, keep, thresholds)


def pca_project(mode, pca: PcaResult) -> MultichannelSignal:
    """Project the centred mode onto the retained eigenvectors and restore
    the mean."""
    sig = as_signal(mode)
    x = sig.samples
    if x.shape[1] != pca.m:
        raise DataError(f"mode has {x.shape[1]} channels, PCA has {pca.m}")
    mean = x.mean(axis=0)
    v = pca.eigenvectors[:, pca.retained]
    return MultichannelSignal((x - mean) @ v @ v.T + mean, sig.sample_rate)
