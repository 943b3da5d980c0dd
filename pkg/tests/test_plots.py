import re
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from mvdenoise.denoise import denoise
from mvdenoise.dfa import mdfa
from mvdenoise.mvmd import MvmdConfig
from mvdenoise.plots import alpha_plot_svg, emit_plots, loglog_plot_svg
from mvdenoise.signal import NoiseSpec, add_noise, make_quadrivariate

NS = "{http://www.w3.org/2000/svg}"


@pytest.fixture(scope="module")
def report():
    clean = make_quadrivariate(1024)
    _, rep = denoise(add_noise(clean, NoiseSpec([6.0] * 4, seed=0)), MvmdConfig(k=10))
    return rep


def test_alpha_markers_and_cut(report, tmp_path):
    written = emit_plots(report, report.mode_scores.curves, tmp_path)
    assert sorted(p.name for p in written) == ["alpha_vs_k.svg", "loglog_fluctuation.svg"]
    root = ET.parse(tmp_path / "alpha_vs_k.svg").getroot()
    markers = [c for c in root.iter(f"{NS}circle") if c.get("class") == "marker"]
    assert len(markers) == 10
    cuts = [ln for ln in root.iter(f"{NS}line") if ln.get("class") == "cut"]
    assert len(cuts) == 1
    assert f"K1 = {report.k1}" in (tmp_path / "alpha_vs_k.svg").read_text()


def test_empty_curves_skip_loglog(report, tmp_path):
    written = emit_plots(report, [], tmp_path)
    assert [p.name for p in written] == ["alpha_vs_k.svg"]
    assert not (tmp_path / "loglog_fluctuation.svg").exists()


def test_dict_report(report, tmp_path):
    emit_plots(report.to_dict(), [], tmp_path)
    assert (tmp_path / "alpha_vs_k.svg").exists()


def test_slope_annotations_match_alphas(report):
    svg = loglog_plot_svg(report.mode_scores.curves)
    shown = [float(v) for v in re.findall(r"alpha=(-?[0-9.]+)", svg)]
    fitted = [c.alpha for c in report.mode_scores.curves if not c.degenerate]
    assert shown == [float(f"{a:.4f}") for a in fitted]


def test_fit_line_slope_matches_alpha():
    curve = mdfa(np.random.default_rng(0).standard_normal((2048, 3)).cumsum(axis=0))
    root = ET.fromstring(loglog_plot_svg([curve]))
    line = next(ln for ln in root.iter(f"{NS}line") if ln.get("class") == "fit")
    x1, y1, x2, y2 = (float(line.get(k)) for k in ("x1", "y1", "x2", "y2"))
    ls = np.log(curve.scales)
    lf = np.log(curve.f_values)
    # pixel slope rescaled back to data units
    from mvdenoise.plots import _Axes

    ax = _Axes((ls.min(), ls.max()), (lf.min(), lf.max()))
    data_slope = ((ax.y1 - ax.y0) / ax.h * (y1 - y2)) / ((ax.x1 - ax.x0) / ax.w * (x2 - x1))
    assert data_slope == pytest.approx(curve.alpha, abs=1e-3)


def test_constant_alphas_render():
    svg = alpha_plot_svg([1.0, 1.0, 1.0], k1=1)
    ET.fromstring(svg)
    assert svg.count('class="marker"') == 3
