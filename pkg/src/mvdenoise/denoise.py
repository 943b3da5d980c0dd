"""MVMD + multichannel DFA denoising and the SNR benchmark harness.

Pipeline: decompose the noisy signal into K modes, score each mode's
scaling exponent, cut at the largest jump between consecutive exponents,
PCA-clean the kept modes one at a time and sum them.
"""
from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dfa import DEFAULT_SCALES, FluctuationCurve, fluctuation_curve
from .errors import DataError
from .linalg import pca_project, pca_select, robust_noise_covariance
from .mvmd import BlimfSet, MvmdConfig, mode_noise_gains, mvmd_decompose
from .signal import MultichannelSignal, NoiseSpec, SnrReport, add_noise, as_signal, snr

__all__ = [
    "SELECTION_VARIANTS",
    "ModeScores",
    "DenoiseReport",
    "BenchmarkRow",
    "BenchmarkResult",
    "score_modes",
    "select_cut",
    "denoise",
    "unbalanced_targets",
    "noise_targets",
    "benchmark",
]

SELECTION_VARIANTS = ("mahalanobis", "euclidean")
PCA_REFERENCES = ("noise", "mean")


@dataclass(frozen=True)
class ModeScores:
    alphas: tuple[float, ...]
    betas: tuple[float, ...]
    k1: int
    curves: tuple[FluctuationCurve, ...] = field(default=(), compare=False, repr=False)


def select_cut(alphas: Sequence[float]) -> tuple[tuple[float, ...], int]:
    """Absolute exponent jumps between neighbouring modes and the 1-based
    index of the first largest jump."""
    a = [float(v) for v in alphas]
    if len(a) < 2:
        raise DataError(f"need at least 2 modes to place a cut, got {len(a)}")
    betas = tuple(abs(a[j + 1] - a[j]) for j in range(len(a) - 1))
    return betas, betas.index(max(betas)) + 1


def score_modes(blimfs: BlimfSet, scales=DEFAULT_SCALES, variant: str = "mahalanobis",
                order: int = 2) -> ModeScores:
    if variant not in SELECTION_VARIANTS:
        raise DataError(f"unknown selection variant {variant!r}; expected one of {', '.join(SELECTION_VARIANTS)}")
    if blimfs.k < 2:
        raise DataError(f"mode scoring needs K >= 2, got {blimfs.k}")
    curves = tuple(fluctuation_curve(u, scales, variant, order) for u in blimfs.modes)
    alphas = tuple(c.alpha for c in curves)
    betas, k1 = select_cut(alphas)
    return ModeScores(alphas, betas, k1, curves)


@dataclass(frozen=True)
class DenoiseReport:
    mode_scores: ModeScores
    retained_components: tuple[int, ...]
    center_frequencies: tuple[float, ...] = ()
    input_snr: SnrReport | None = None
    output_snr: SnrReport | None = None
    config: dict = field(default_factory=dict)

    @property
    def k1(self) -> int:
        return self.mode_scores.k1

    def to_dict(self) -> dict:
        s = self.mode_scores
        return {
            "alphas": list(s.alphas),
            "betas": list(s.betas),
            "k1": s.k1,
            "retained_components": list(self.retained_components),
            "center_frequencies": list(self.center_frequencies),
            "input_snr_db": self.input_snr.to_dict() if self.input_snr else None,
            "output_snr_db": self.output_snr.to_dict() if self.output_snr else None,
            "config": self.config,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, allow_nan=False) + "\n"


def denoise(noisy, mvmd_config: MvmdConfig = MvmdConfig(), scales=DEFAULT_SCALES,
            variant: str = "mahalanobis", clean=None, order: int = 2,
            pca_reference: str = "noise"):
    """Denoise a multichannel signal.

    Returns ``(estimate, report)``. With a ``clean`` reference the report
    carries input and output SNRs; otherwise those fields are ``None``.

    ``pca_reference`` sets what each kept mode's eigenvalues are compared
    with during PCA cleanup: ``"noise"`` uses the input noise covariance
    (estimated robustly) scaled by the mode's noise gain, ``"mean"`` uses the
    mode's mean eigenvalue.
    """
    noisy = as_signal(noisy)
    scales = tuple(int(s) for s in scales)
    if pca_reference not in PCA_REFERENCES:
        raise DataError(f"unknown PCA reference {pca_reference!r}; expected one of {', '.join(PCA_REFERENCES)}")
    blimfs = mvmd_decompose(noisy, mvmd_config)
    if blimfs.k == 1:
        curve = fluctuation_curve(blimfs.modes[0], scales, variant, order)
        scores = ModeScores((curve.alpha,), (), 1, (curve,))
    else:
        scores = score_modes(blimfs, scales, variant, order)

    if pca_reference == "noise":
        noise_cov = robust_noise_covariance(noisy)
        gains = mode_noise_gains(blimfs)
    estimate = np.zeros(noisy.shape)
    retained = []
    for k, u in enumerate(blimfs.modes[: scores.k1]):
        pca = pca_select(u, noise_cov * gains[k] if pca_reference == "noise" else None)
        retained.append(pca.retained_count)
        estimate += pca_project(u, pca).samples
    estimate = MultichannelSignal(estimate, noisy.sample_rate)

    config = {
        "mvmd": mvmd_config.to_dict(),
        "scales": list(scales),
        "variant": variant,
        "detrend_order": order,
        "pca_reference": pca_reference,
    }
    report = DenoiseReport(
        scores,
        tuple(retained),
        tuple(float(w) for w in blimfs.center_frequencies),
        snr(clean, noisy) if clean is not None else None,
        snr(clean, estimate) if clean is not None else None,
        config,
    )
    return estimate, report


# ---------------------------------------------------------------------------
# Benchmark


def unbalanced_targets(average_db: float, m: int, step_db: float = 1.0) -> tuple[float, ...]:
    """Per-channel SNRs spaced ``step_db`` apart and centred on the average,
    e.g. ``(9, 10, 11)`` for an average of 10 dB over three channels."""
    return tuple(average_db + step_db * (j - (m - 1) / 2) for j in range(m))


def noise_targets(average_db: float, m: int, balanced: bool = True) -> tuple[float, ...]:
    return (float(average_db),) * m if balanced else unbalanced_targets(average_db, m)


@dataclass(frozen=True)
class BenchmarkRow:
    target_db: float
    seed: int
    report: DenoiseReport


@dataclass(frozen=True)
class BenchmarkResult:
    rows: tuple[BenchmarkRow, ...]

    def grid(self) -> list[float]:
        return sorted({r.target_db for r in self.rows})

    def mean_output_db(self, target_db: float) -> float:
        return float(np.mean([r.report.output_snr.average_db for r in self.rows if r.target_db == target_db]))

    def mean_input_db(self, target_db: float) -> float:
        return float(np.mean([r.report.input_snr.average_db for r in self.rows if r.target_db == target_db]))

    def summary(self) -> list[dict]:
        return [
            {
                "input_snr_db": t,
                "mean_input_db": self.mean_input_db(t),
                "mean_output_db": self.mean_output_db(t),
                "mean_k1": float(np.mean([r.report.k1 for r in self.rows if r.target_db == t])),
                "runs": sum(r.target_db == t for r in self.rows),
            }
            for t in self.grid()
        ]

    def to_dict(self) -> dict:
        return {
            "summary": self.summary(),
            "runs": [
                {"target_db": r.target_db, "seed": r.seed, "report": r.report.to_dict()}
                for r in self.rows
            ],
        }


def _benchmark_task(args):
    clean, target, seed, balanced, correlation, mvmd_config, scales, variant = args
    spec = NoiseSpec(noise_targets(target, clean.m, balanced), seed, correlation)
    noisy = add_noise(clean, spec)
    _, report = denoise(noisy, mvmd_config, scales, variant, clean=clean)
    return BenchmarkRow(float(target), int(seed), report)


def benchmark(clean, snr_grid: Sequence[float], seeds: Sequence[int], balanced: bool = True,
              variant: str = "mahalanobis", mvmd_config: MvmdConfig = MvmdConfig(),
              scales=DEFAULT_SCALES, noise_correlation=None, workers: int = 1) -> BenchmarkResult:
    """Denoise ``clean + noise`` for every (SNR target, seed) pair.

    The noise realization depends only on the seed, so runs at different
    grid points share noise shapes. Results do not depend on ``workers``.
    """
    clean = as_signal(clean)
    seeds = [int(s) for s in seeds]
    if not seeds:
        raise DataError("benchmark needs at least one seed")
    if not all(math.isfinite(t) for t in snr_grid):
        raise DataError("SNR grid values must be finite")
    tasks = [
        (clean, float(t), s, balanced, noise_correlation, mvmd_config, tuple(scales), variant)
        for t in snr_grid
        for s in seeds
    ]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_benchmark_task, tasks))
    else:
        rows = [_benchmark_task(t) for t in tasks]
    return BenchmarkResult(tuple(rows))
