"""Static SVG figures written as plain markup (no plotting dependency)."""
from __future__ import annotations

import math
from pathlib import Path
from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np

from .dfa import FluctuationCurve
from .signal import atomic_write_text

__all__ = ["alpha_plot_svg", "loglog_plot_svg", "emit_plots"]

WIDTH, HEIGHT = 640, 420
MARGIN = dict(left=64, right=24, top=36, bottom=52)
PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
           "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf")


class _Axes:
    def __init__(self, xlim, ylim):
        self.x0, self.x1 = _pad(*xlim)
        self.y0, self.y1 = _pad(*ylim)
        self.w = WIDTH - MARGIN["left"] - MARGIN["right"]
        self.h = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    def px(self, x):
        return MARGIN["left"] + (x - self.x0) / (self.x1 - self.x0) * self.w

    def py(self, y):
        return MARGIN["top"] + (self.y1 - y) / (self.y1 - self.y0) * self.h

    def frame(self, title, xlabel, ylabel) -> list[str]:
        left, top = MARGIN["left"], MARGIN["top"]
        out = [
            f'<rect x="{left}" y="{top}" width="{self.w}" height="{self.h}" fill="none" stroke="#333"/>',
            f'<text x="{WIDTH / 2:.1f}" y="22" text-anchor="middle" font-size="15">{escape(title)}</text>',
            f'<text x="{left + self.w / 2:.1f}" y="{HEIGHT - 12}" text-anchor="middle" font-size="13">{escape(xlabel)}</text>',
            f'<text x="16" y="{top + self.h / 2:.1f}" text-anchor="middle" font-size="13" '
            f'transform="rotate(-90 16 {top + self.h / 2:.1f})">{escape(ylabel)}</text>',
        ]
        for v in _ticks(self.x0, self.x1):
            x = self.px(v)
            out.append(f'<line x1="{x:.1f}" y1="{top + self.h}" x2="{x:.1f}" y2="{top + self.h + 5}" stroke="#333"/>')
            out.append(f'<text x="{x:.1f}" y="{top + self.h + 19}" text-anchor="middle" font-size="11">{v:g}</text>')
        for v in _ticks(self.y0, self.y1):
            y = self.py(v)
            out.append(f'<line x1="{left - 5}" y1="{y:.1f}" x2="{left}" y2="{y:.1f}" stroke="#333"/>')
            out.append(f'<text x="{left - 8}" y="{y + 4:.1f}" text-anchor="end" font-size="11">{v:g}</text>')
        return out


def _pad(lo, hi):
    if hi - lo < 1e-12:
        lo, hi = lo - 0.5, hi + 0.5
    span = hi - lo
    return lo - 0.05 * span, hi + 0.05 * span


def _ticks(lo, hi, count=6):
    step = 10 ** math.floor(math.log10((hi - lo) / count))
    for mult in (1, 2, 5, 10):
        if (hi - lo) / (step * mult) <= count:
            step *= mult
            break
    start = math.ceil(lo / step) * step
    return [round(v, 10) for v in np.arange(start, hi + step * 1e-9, step)]


def _document(body: list[str]) -> str:
    head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
            f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif">')
    return "\n".join([head, f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>', *body, "</svg>"]) + "\n"


def alpha_plot_svg(alphas: Sequence[float], k1: int | None = None) -> str:
    """Scaling exponent against mode index, with the cut after mode ``k1``
    drawn as a dashed vertical line."""
    k = np.arange(1, len(alphas) + 1)
    a = np.asarray(alphas, dtype=float)
    ax = _Axes((1, max(len(a), 2)), (float(a.min()), float(a.max())))
    body = ax.frame("Scaling exponent per mode", "mode index k", "alpha_k")
    pts = " ".join(f"{ax.px(x):.2f},{ax.py(y):.2f}" for x, y in zip(k, a))
    body.append(f'<polyline points="{pts}" fill="none" stroke="{PALETTE[0]}" stroke-width="1.5"/>')
    for x, y in zip(k, a):
        body.append(f'<circle class="marker" cx="{ax.px(x):.2f}" cy="{ax.py(y):.2f}" r="4" '
                    f'fill="{PALETTE[0]}"><title>k={x} alpha={y:.4f}</title></circle>')
    if k1 is not None and 1 <= k1 < len(a):
        x = ax.px(k1 + 0.5)
        body.append(f'<line class="cut" x1="{x:.2f}" y1="{MARGIN["top"]}" x2="{x:.2f}" '
                    f'y2="{HEIGHT - MARGIN["bottom"]}" stroke="{PALETTE[3]}" stroke-dasharray="6,4"/>')
        body.append(f'<text x="{x + 4:.2f}" y="{MARGIN["top"] + 14}" font-size="12" '
                    f'fill="{PALETTE[3]}">K1 = {k1}</text>')
    return _document(body)


def loglog_plot_svg(curves: Sequence[FluctuationCurve]) -> str:
    """``ln F`` against ``ln s`` per curve, with the fitted line and its slope."""
    logs, logf = [], []
    for c in curves:
        keep = np.asarray(c.f_values) > 0
        logs.append(np.log(np.asarray(c.scales, dtype=float)[keep]))
        logf.append(np.log(np.asarray(c.f_values)[keep]))
    xs = np.concatenate(logs)
    ys = np.concatenate(logf)
    ax = _Axes((float(xs.min()), float(xs.max())), (float(ys.min()), float(ys.max())))
    body = ax.frame("Fluctuation function", "ln s", "ln F(s)")
    for j, (c, ls, lf) in enumerate(zip(curves, logs, logf)):
        color = PALETTE[j % len(PALETTE)]
        for x, y in zip(ls, lf):
            body.append(f'<circle cx="{ax.px(x):.2f}" cy="{ax.py(y):.2f}" r="2.5" fill="{color}"/>')
        if c.degenerate or ls.size < 2:
            continue
        intercept = float(np.mean(lf - c.alpha * ls))
        x0, x1 = float(ls.min()), float(ls.max())
        body.append(f'<line class="fit" x1="{ax.px(x0):.2f}" y1="{ax.py(intercept + c.alpha * x0):.2f}" '
                    f'x2="{ax.px(x1):.2f}" y2="{ax.py(intercept + c.alpha * x1):.2f}" stroke="{color}"/>')
        body.append(f'<text class="slope" x="{ax.px(x1) + 3:.2f}" y="{ax.py(intercept + c.alpha * x1) + 4:.2f}" '
                    f'font-size="10" fill="{color}">{j + 1}: alpha={c.alpha:.4f}</text>')
    return _document(body)


def emit_plots(report, curves: Sequence[FluctuationCurve], directory) -> list[Path]:
    """Write ``alpha_vs_k.svg`` for a denoising report and, when ``curves`` is
    non-empty, ``loglog_fluctuation.svg``. Returns the paths written.

    ``report`` may be a ``DenoiseReport`` or its ``to_dict()`` form.
    """
    if isinstance(report, dict):
        alphas, k1 = report["alphas"], report["k1"]
    else:
        alphas, k1 = report.mode_scores.alphas, report.k1
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    if len(alphas):
        path = directory / "alpha_vs_k.svg"
        atomic_write_text(path, alpha_plot_svg(alphas, k1))
        written.append(path)
    if curves:
        path = directory / "loglog_fluctuation.svg"
        atomic_write_text(path, loglog_plot_svg(curves))
        written.append(path)
    return written
