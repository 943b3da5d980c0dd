"""Detrended fluctuation analysis: univariate, Euclidean multichannel and
Mahalanobis multichannel variants, plus the log-log exponent fit.

All variants share the same pipeline: profile (scaled cumulative sum of the
centred series), both-ends segmentation at scale ``s``, per-channel
polynomial detrending, and a root-mean fluctuation over every residual
vector. They differ only in the norm applied to each residual vector.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .errors import DataError
from .linalg import CovarianceMatrix, as_covariance, covariance, detrend_operator

__all__ = [
    "DEFAULT_SCALES",
    "VARIANTS",
    "Profile",
    "SegmentLayout",
    "FluctuationCurve",
    "ExponentFit",
    "profile",
    "segment",
    "detrend",
    "fluctuation_univariate",
    "fluctuation_euclidean",
    "fluctuation_mahalanobis",
    "scaling_exponent",
    "mdfa",
    "mdfa_euclidean",
    "dfa_univariate",
    "fluctuation_curve",
]

DEFAULT_SCALES = tuple(range(4, 17))
VARIANTS = ("mahalanobis", "euclidean", "univariate")
MIN_SCALE = 4
# Residual energy below this fraction of the profile energy is rounding noise.
_ZERO_RESIDUAL_RTOL = 1e-26


def _as_matrix(x) -> np.ndarray:
    a = np.asarray(x, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2:
        raise DataError(f"expected an (N, m) array, got {a.ndim} dimensions")
    if not np.all(np.isfinite(a)):
        raise DataError("input contains NaN or Inf")
    return a


@dataclass(frozen=True, eq=False)
class Profile:
    values: np.ndarray

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def m(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True, eq=False)
class SegmentLayout:
    """``2 * N_s`` segments of length ``s``: ``N_s`` tiling from the start of
    the series and ``N_s`` tiling back from the end.

    ``starts`` holds 0-based first indices; ``ranges`` gives the 1-based
    inclusive index ranges.
    """

    n: int
    scale: int
    starts: np.ndarray

    @property
    def n_segments(self) -> int:
        return self.starts.size

    @property
    def ranges(self) -> list[tuple[int, int]]:
        return [(int(a) + 1, int(a) + self.scale) for a in self.starts]

    def indices(self) -> np.ndarray:
        return self.starts[:, None] + np.arange(self.scale)


class ExponentFit(NamedTuple):
    alpha: float
    residual: float
    degenerate: bool


@dataclass(frozen=True, eq=False)
class FluctuationCurve:
    scales: tuple[int, ...]
    f_values: np.ndarray
    alpha: float
    fit_residual: float
    degenerate: bool = False
    variant: str = "mahalanobis"

    def points(self) -> list[tuple[int, float]]:
        return [(s, float(f)) for s, f in zip(self.scales, self.f_values)]

    def to_dict(self) -> dict:
        return {
            "variant": self.variant,
            "scales": list(self.scales),
            "f_values": [float(f) for f in self.f_values],
            "alpha": self.alpha,
            "fit_residual": self.fit_residual,
            "degenerate": self.degenerate,
        }


def profile(signal) -> Profile:
    """Cumulative sum of the mean-removed series, divided by N."""
    x = _as_matrix(signal)
    n = x.shape[0]
    if n < 2:
        raise DataError(f"profile needs N >= 2, got {n}")
    return Profile(np.cumsum(x - x.mean(axis=0), axis=0) / n)


def segment(n: int, s: int) -> SegmentLayout:
    if s < MIN_SCALE:
        raise DataError(f"scale {s} is below the minimum of {MIN_SCALE}")
    ns = n // s
    if ns < 1:
        raise DataError(f"scale {s} exceeds series length {n}")
    head = np.arange(ns) * s
    tail = n - ns * s + head
    return SegmentLayout(n, s, np.concatenate([head, tail]))


def detrend(prof: Profile | np.ndarray, layout: SegmentLayout, order: int = 2) -> np.ndarray:
    """Polynomial-fit residuals per segment and channel, shape ``(2N_s, s, m)``."""
    y = prof.values if isinstance(prof, Profile) else _as_matrix(prof)
    if y.shape[0] != layout.n:
        raise DataError(f"layout is for length {layout.n}, profile has {y.shape[0]} samples")
    segs = y[layout.indices()]
    return np.einsum("ij,vjm->vim", detrend_operator(layout.scale, order), segs)


def _residuals(x: np.ndarray, s: int, order: int) -> np.ndarray:
    prof = profile(x)
    return detrend(prof, segment(prof.n, s), order)


def fluctuation_univariate(signal, s: int, order: int = 2) -> float:
    x = _as_matrix(signal)
    if x.shape[1] != 1:
        raise DataError(f"univariate DFA needs one channel, got {x.shape[1]}")
    r = _residuals(x, s, order)
    return float(np.sqrt(np.mean(r**2)))


def fluctuation_euclidean(signal, s: int, order: int = 2) -> float:
    """Root mean of squared Euclidean norms of all residual vectors."""
    r = _residuals(_as_matrix(signal), s, order)
    return float(np.sqrt(np.mean(np.sum(r**2, axis=-1))))


def _is_zero_residual(r: np.ndarray, prof_values: np.ndarray) -> bool:
    energy = np.mean(np.sum(r**2, axis=-1))
    ref = np.mean(np.sum(prof_values**2, axis=-1))
    return energy <= _ZERO_RESIDUAL_RTOL * ref


def default_sigma(signal) -> CovarianceMatrix | None:
    """Channel covariance used by the Mahalanobis fluctuation.

    It is estimated once from the signal itself so that every scale is
    measured in the same metric; ``None`` for a constant signal.
    """
    x = _as_matrix(signal)
    xc = x - x.mean(axis=0)
    if not np.any(xc):
        return None
    return covariance(x)


def fluctuation_mahalanobis(signal, s: int, order: int = 2, sigma=None):
    """Root mean of squared Mahalanobis norms of all residual vectors.

    Returns ``(f, sigma_used)``. ``sigma`` overrides the metric; by default it
    is the signal's channel covariance (see ``default_sigma``). A series whose
    residuals vanish gives ``f = 0`` and ``sigma_used = None`` when no metric
    was needed.
    """
    x = _as_matrix(signal)
    n, m = x.shape
    if n < m + 2:
        raise DataError(f"Mahalanobis DFA needs N >= m + 2, got N={n}, m={m}")
    prof = profile(x)
    r = detrend(prof, segment(n, s), order)
    cov = as_covariance(sigma) if sigma is not None else None
    if _is_zero_residual(r, prof.values):
        return 0.0, cov
    if cov is None:
        cov = default_sigma(x)
    if cov.m != m:
        raise DataError(f"covariance is {cov.m}x{cov.m}, signal has {m} channels")
    w = cov.whiten(r)
    return float(np.sqrt(np.mean(np.sum(w * w, axis=-1)))), cov


def scaling_exponent(scales: Sequence[float], f_values: Sequence[float]) -> ExponentFit:
    """Least-squares slope of ``ln F`` against ``ln s``.

    Points with ``F == 0`` are dropped. An all-zero curve returns
    ``alpha = 0`` with ``degenerate = True``.
    """
    s = np.asarray(scales, dtype=float)
    f = np.asarray(f_values, dtype=float)
    if s.shape != f.shape or s.ndim != 1:
        raise DataError("scales and fluctuation values must be 1-D and of equal length")
    if np.any(f < 0) or not np.all(np.isfinite(f)):
        raise DataError("fluctuation values must be finite and non-negative")
    keep = f > 0
    if not np.any(keep):
        return ExponentFit(0.0, 0.0, True)
    if np.count_nonzero(keep) < 2:
        raise DataError("need at least 2 scales with F > 0 to fit an exponent")
    ls, lf = np.log(s[keep]), np.log(f[keep])
    slope, intercept = np.polyfit(ls, lf, 1)
    resid = lf - (slope * ls + intercept)
    return ExponentFit(float(slope), float(np.sqrt(np.mean(resid**2))), False)


def _check_scales(scales, n: int) -> tuple[int, ...]:
    scales = tuple(int(s) for s in scales)
    if len(scales) < 2:
        raise DataError("need at least 2 scales")
    if any(b <= a for a, b in zip(scales, scales[1:])):
        raise DataError("scales must be strictly increasing")
    for s in scales:
        if s < MIN_SCALE or s > n / 4:
            raise DataError(f"scale {s} outside [{MIN_SCALE}, N/4 = {n / 4:g}]")
    return scales


def fluctuation_curve(signal, scales=DEFAULT_SCALES, variant: str = "mahalanobis",
                      order: int = 2, sigma=None) -> FluctuationCurve:
    """F(s) over ``scales`` and the fitted exponent for one DFA variant."""
    if variant not in VARIANTS:
        raise DataError(f"unknown DFA variant {variant!r}; expected one of {', '.join(VARIANTS)}")
    x = _as_matrix(signal)
    n, m = x.shape
    scales = _check_scales(scales, n)
    if variant == "univariate" and m != 1:
        raise DataError(f"univariate DFA needs one channel, got {m}")
    if variant == "mahalanobis" and n < m + 2:
        raise DataError(f"Mahalanobis DFA needs N >= m + 2, got N={n}, m={m}")

    prof = profile(x)
    if variant == "mahalanobis":
        cov = as_covariance(sigma) if sigma is not None else default_sigma(x)

    f = np.empty(len(scales))
    for j, s in enumerate(scales):
        r = detrend(prof, segment(n, s), order)
        if variant == "mahalanobis":
            if cov is None or _is_zero_residual(r, prof.values):
                f[j] = 0.0
                continue
            r = cov.whiten(r)
        f[j] = np.sqrt(np.mean(np.sum(r * r, axis=-1)))

    fit = scaling_exponent(scales, f)
    return FluctuationCurve(scales, f, fit.alpha, fit.residual, fit.degenerate, variant)


def mdfa(signal, scales=DEFAULT_SCALES, order: int = 2, sigma=None) -> FluctuationCurve:
    """Mahalanobis multichannel DFA."""
    return fluctuation_curve(signal, scales, "mahalanobis", order, sigma)


def mdfa_euclidean(signal, scales=DEFAULT_SCALES, order: int = 2) -> FluctuationCurve:
    """Multichannel DFA with the plain Euclidean norm of residual vectors."""
    return fluctuation_curve(signal, scales, "euclidean", order)


def dfa_univariate(signal, scales=DEFAULT_SCALES, order: int = 2) -> FluctuationCurve:
    return fluctuation_curve(signal, scales, "univariate", order)
