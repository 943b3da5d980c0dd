"""Multichannel signal container, CSV I/O, test signals, noise and SNR.

Signals are stored as ``(N, m)`` float arrays: one row per time index, one
column per channel.
"""
from __future__ import annotations

import csv
import math
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DataError

__all__ = [
    "MultichannelSignal",
    "NoiseSpec",
    "SnrReport",
    "TEST_SIGNALS",
    "as_signal",
    "load_csv",
    "save_csv",
    "generate_test_signal",
    "make_quadrivariate",
    "make_mixed_surrogate",
    "SURROGATE_MIXING",
    "add_noise",
    "snr",
]

TEST_SIGNALS = ("blocks", "bumps", "doppler", "heavisine")

# Donoho-Johnstone jump / bump locations shared by blocks and bumps.
_DJ_POS = np.array([0.1, 0.13, 0.15, 0.23, 0.25, 0.40, 0.44, 0.65, 0.76, 0.78, 0.81])
_BLOCKS_HGT = np.array([4, -5, 3, -4, 5, -4.2, 2.1, 4.3, -3.1, 2.1, -4.2])
_BUMPS_HGT = np.array([4, 5, 3, 4, 5, 4.2, 2.1, 4.3, 3.1, 5.1, 4.2])
_BUMPS_WTH = np.array([0.005, 0.005, 0.006, 0.01, 0.01, 0.03, 0.01, 0.01, 0.005, 0.008, 0.005])


@dataclass(frozen=True, eq=False)
class MultichannelSignal:
    """N samples by m channels of finite real values.

    A 1-D input is treated as a single channel. The sample array is copied and
    marked read-only, so instances can be shared freely.
    """

    samples: np.ndarray
    sample_rate: float = 1.0

    def __post_init__(self):
        x = np.array(self.samples, dtype=float, copy=True)
        if x.ndim == 1:
            x = x[:, None]
        if x.ndim != 2:
            raise DataError(f"signal must be 1-D or 2-D, got {x.ndim} dimensions")
        if x.shape[0] < 1 or x.shape[1] < 1:
            raise DataError(f"signal must have N >= 1 and m >= 1, got shape {x.shape}")
        if not np.all(np.isfinite(x)):
            raise DataError("signal contains NaN or Inf")
        if not (self.sample_rate > 0 and math.isfinite(self.sample_rate)):
            raise DataError(f"sample_rate must be positive, got {self.sample_rate}")
        x.setflags(write=False)
        object.__setattr__(self, "samples", x)

    @property
    def n(self) -> int:
        return self.samples.shape[0]

    @property
    def m(self) -> int:
        return self.samples.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.samples.shape

    def channel(self, j: int) -> np.ndarray:
        return self.samples[:, j]

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self.samples
        return self.samples.astype(dtype)

    def __len__(self):
        return self.n


def as_signal(x) -> MultichannelSignal:
    if isinstance(x, MultichannelSignal):
        return x
    return MultichannelSignal(x)


@dataclass(frozen=True)
class NoiseSpec:
    """Per-channel target SNRs (dB), RNG seed and optional noise correlation."""

    per_channel_snr_db: Sequence[float]
    seed: int = 0
    cross_channel_correlation: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        snrs = tuple(float(v) for v in self.per_channel_snr_db)
        if not snrs or not all(math.isfinite(v) for v in snrs):
            raise DataError("per_channel_snr_db must be a non-empty list of finite values")
        object.__setattr__(self, "per_channel_snr_db", snrs)
        if self.seed < 0:
            raise DataError(f"seed must be non-negative, got {self.seed}")
        c = self.cross_channel_correlation
        if c is None:
            return
        c = np.array(c, dtype=float)
        m = len(snrs)
        if c.shape != (m, m):
            raise DataError(f"noise correlation must be {m}x{m}, got {c.shape}")
        if not np.allclose(c, c.T, atol=1e-12) or not np.allclose(np.diag(c), 1.0, atol=1e-12):
            raise DataError("noise correlation must be symmetric with unit diagonal")
        if np.linalg.eigvalsh(c).min() < -1e-10:
            raise DataError("noise correlation must be positive semi-definite")
        c.setflags(write=False)
        object.__setattr__(self, "cross_channel_correlation", c)

    @property
    def m(self) -> int:
        return len(self.per_channel_snr_db)


@dataclass(frozen=True)
class SnrReport:
    """Per-channel SNR in dB and their arithmetic mean.

    A channel reconstructed without error has SNR ``math.inf``; ``infinite``
    flags that case.
    """

    per_channel_db: tuple[float, ...]
    average_db: float

    @classmethod
    def from_channels(cls, values) -> "SnrReport":
        values = tuple(float(v) for v in values)
        return cls(values, float(np.mean(values)))

    @property
    def infinite(self) -> bool:
        return math.isinf(self.average_db)

    def to_dict(self) -> dict:
        def enc(v):
            return "inf" if math.isinf(v) else v

        return {"per_channel": [enc(v) for v in self.per_channel_db], "average": enc(self.average_db)}


# ---------------------------------------------------------------------------
# CSV


def load_csv(path, has_header: bool = False) -> MultichannelSignal:
    """Read a comma-separated file into a signal, one row per time index."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"{path}: no such file")
    rows = []
    width = None
    with path.open(newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if has_header and lineno == 1:
                continue
            if not row or all(not c.strip() for c in row):
                continue
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise DataError(f"{path}: row {lineno} has {len(row)} columns, expected {width}")
            try:
                values = [float(c) for c in row]
            except ValueError:
                col = next(i for i, c in enumerate(row, start=1) if not _is_float(c))
                raise DataError(f"{path}: row {lineno}, column {col}: not a number: {row[col - 1]!r}") from None
            for col, v in enumerate(values, start=1):
                if not math.isfinite(v):
                    raise DataError(f"{path}: row {lineno}, column {col}: non-finite value")
            rows.append(values)
    if not rows:
        raise DataError(f"{path}: no data rows")
    return MultichannelSignal(np.array(rows, dtype=float))


def _is_float(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def _format(v: float) -> str:
    return "%.17g" % v


def save_csv(signal, path, header: Sequence[str] | None = None) -> None:
    """Write a signal as CSV with 17 significant digits.

    The file is written to a temporary sibling and renamed into place, so a
    failed write never leaves partial output behind.
    """
    x = np.asarray(as_signal(signal))
    path = Path(path)
    lines = []
    if header is not None:
        if len(header) != x.shape[1]:
            raise DataError(f"header has {len(header)} names for {x.shape[1]} channels")
        lines.append(",".join(header))
    lines.extend(",".join(_format(v) for v in row) for row in x)
    atomic_write_text(path, "\n".join(lines) + "\n")


def atomic_write_text(path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# ---------------------------------------------------------------------------
# Test signals


def _raw_test_signal(kind: str, t: np.ndarray) -> np.ndarray:
    if kind == "blocks":
        return np.sum(_BLOCKS_HGT * (1 + np.sign(t[:, None] - _DJ_POS)) / 2, axis=1)
    if kind == "bumps":
        return np.sum(_BUMPS_HGT / (1 + np.abs((t[:, None] - _DJ_POS) / _BUMPS_WTH)) ** 4, axis=1)
    if kind == "doppler":
        return np.sqrt(t * (1 - t)) * np.sin(2 * np.pi * 1.05 / (t + 0.05))
    if kind == "heavisine":
        return 4 * np.sin(4 * np.pi * t) - np.sign(t - 0.3) - np.sign(0.72 - t)
    raise DataError(f"unknown test signal {kind!r}; expected one of {', '.join(TEST_SIGNALS)}")


def generate_test_signal(kind: str, n: int) -> MultichannelSignal:
    """Donoho-Johnstone test waveform sampled at ``i/n``, ``i = 1..n``.

    The waveform is divided by its sample standard deviation (no mean
    removal), so it has unit standard deviation.
    """
    kind = kind.lower()
    if kind not in TEST_SIGNALS:
        raise DataError(f"unknown test signal {kind!r}; expected one of {', '.join(TEST_SIGNALS)}")
    if n < 16:
        raise DataError(f"test signal length must be >= 16, got {n}")
    t = np.arange(1, n + 1) / n
    y = _raw_test_signal(kind, t)
    return MultichannelSignal(y / np.std(y, ddof=1))


def make_quadrivariate(n: int) -> MultichannelSignal:
    """Four-channel benchmark: blocks, bumps, doppler, heavisine."""
    cols = [generate_test_signal(kind, n).samples[:, 0] for kind in TEST_SIGNALS]
    return MultichannelSignal(np.column_stack(cols))


# Channel gains times a non-diagonal coupling, used by the cross-correlated
# surrogate: each output channel blends heavisine, doppler and blocks.
SURROGATE_MIXING = np.diag([1.0, 2.0, 0.5]) @ np.array(
    [[1.0, 0.5, 0.2], [0.5, 1.0, 0.5], [0.2, 0.5, 1.0]]
)


def make_mixed_surrogate(n: int) -> MultichannelSignal:
    """Three cross-correlated channels: ``sources @ SURROGATE_MIXING.T`` with
    heavisine, doppler and blocks as the sources."""
    src = np.column_stack(
        [generate_test_signal(kind, n).samples[:, 0] for kind in ("heavisine", "doppler", "blocks")]
    )
    return MultichannelSignal(src @ SURROGATE_MIXING.T)


# ---------------------------------------------------------------------------
# Noise and SNR


def _correlated_normals(rng: np.random.Generator, n: int, corr: np.ndarray) -> np.ndarray:
    w = rng.standard_normal((n, corr.shape[0]))
    try:
        factor = np.linalg.cholesky(corr)
    except np.linalg.LinAlgError:
        # semi-definite: fall back to the symmetric square root
        vals, vecs = np.linalg.eigh(corr)
        factor = vecs * np.sqrt(np.clip(vals, 0.0, None))
    return w @ factor.T


def add_noise(clean, spec: NoiseSpec) -> MultichannelSignal:
    """Add seeded Gaussian noise scaled to hit each channel's SNR exactly.

    Each noise channel is rescaled after drawing so that the realized SNR
    equals the target, rather than matching it only in expectation.
    """
    clean = as_signal(clean)
    if spec.m != clean.m:
        raise DataError(f"noise spec has {spec.m} channels, signal has {clean.m}")
    s = clean.samples
    power = np.sum(s**2, axis=0)
    if np.any(power == 0):
        bad = int(np.flatnonzero(power == 0)[0]) + 1
        raise DataError(f"channel {bad} is all zeros; SNR is undefined")
    rng = np.random.default_rng(spec.seed)
    if spec.cross_channel_correlation is None:
        w = rng.standard_normal(s.shape)
    else:
        w = _correlated_normals(rng, clean.n, spec.cross_channel_correlation)
    target = np.asarray(spec.per_channel_snr_db)
    w *= np.sqrt(power / (np.sum(w**2, axis=0) * 10 ** (target / 10)))
    return MultichannelSignal(s + w, clean.sample_rate)


def snr(clean, estimate) -> SnrReport:
    """Per-channel ``10*log10(sum s^2 / sum (s - s_hat)^2)`` and its mean."""
    s = np.asarray(as_signal(clean))
    e = np.asarray(as_signal(estimate))
    if s.shape != e.shape:
        raise DataError(f"shape mismatch: clean {s.shape} vs estimate {e.shape}")
    power = np.sum(s**2, axis=0)
    if np.any(power == 0):
        raise DataError("clean reference has a zero-energy channel")
    err = np.sum((s - e) ** 2, axis=0)
    with np.errstate(divide="ignore"):
        db = np.where(err > 0, 10 * np.log10(power / np.where(err > 0, err, 1.0)), np.inf)
    return SnrReport.from_channels(db)
