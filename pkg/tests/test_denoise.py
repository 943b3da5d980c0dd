import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mvdenoise.denoise import (
    benchmark,
    denoise,
    noise_targets,
    score_modes,
    select_cut,
    unbalanced_targets,
)
from mvdenoise.errors import DataError
from mvdenoise.mvmd import MvmdConfig, mvmd_decompose
from mvdenoise.signal import NoiseSpec, add_noise, generate_test_signal, make_quadrivariate

SMALL = MvmdConfig(k=6)


@pytest.fixture(scope="module")
def noisy_quad():
    clean = make_quadrivariate(1024)
    return clean, add_noise(clean, NoiseSpec([6.0] * 4, seed=1))


class TestCut:
    def test_worked_example(self):
        betas, k1 = select_cut([2.0, 1.6, 1.4, 0.8, 0.5])
        assert betas == pytest.approx((0.4, 0.2, 0.6, 0.3), abs=1e-12)
        assert k1 == 3

    def test_largest_jump_between_fourth_and_fifth(self):
        alphas = [1.9, 1.8, 1.6, 1.5, 0.6, 0.5, 0.45, 0.4, 0.38, 0.35]
        assert select_cut(alphas)[1] == 4

    def test_all_equal(self):
        betas, k1 = select_cut([0.7] * 6)
        assert betas == (0.0,) * 5 and k1 == 1

    def test_last_position(self):
        assert select_cut([1.0, 1.0, 3.0])[1] == 2

    @given(st.lists(st.floats(-5, 5), min_size=2, max_size=20))
    def test_definitions(self, alphas):
        betas, k1 = select_cut(alphas)
        assert len(betas) == len(alphas) - 1
        assert all(b == abs(alphas[i + 1] - alphas[i]) for i, b in enumerate(betas))
        assert betas[k1 - 1] == max(betas)
        assert all(b < max(betas) for b in betas[: k1 - 1])

    def test_too_few(self):
        with pytest.raises(DataError):
            select_cut([1.0])


class TestScoreModes:
    def test_scores(self, noisy_quad):
        _, noisy = noisy_quad
        b = mvmd_decompose(noisy, SMALL)
        s = score_modes(b)
        assert len(s.alphas) == 6 and len(s.curves) == 6
        assert 1 <= s.k1 <= 6
        assert s.betas == tuple(abs(s.alphas[i + 1] - s.alphas[i]) for i in range(5))

    def test_errors(self, noisy_quad):
        _, noisy = noisy_quad
        with pytest.raises(DataError):
            score_modes(mvmd_decompose(noisy, MvmdConfig(k=1)))
        with pytest.raises(DataError):
            score_modes(mvmd_decompose(noisy, SMALL), variant="univariate")


class TestDenoise:
    def test_report_and_shape(self, noisy_quad):
        clean, noisy = noisy_quad
        est, rep = denoise(noisy, SMALL, clean=clean)
        assert est.shape == noisy.shape
        assert len(rep.retained_components) == rep.k1
        assert all(1 <= r <= 4 for r in rep.retained_components)
        assert rep.output_snr.average_db > rep.input_snr.average_db
        assert rep.input_snr.average_db == pytest.approx(6.0, abs=1e-9)

    def test_estimate_is_sum_of_cleaned_modes(self, noisy_quad):
        from mvdenoise.linalg import pca_project, pca_select, robust_noise_covariance
        from mvdenoise.mvmd import mode_noise_gains

        _, noisy = noisy_quad
        est, rep = denoise(noisy, SMALL)
        b = mvmd_decompose(noisy, SMALL)
        cov = robust_noise_covariance(noisy)
        gains = mode_noise_gains(b)
        manual = sum(pca_project(b.modes[k], pca_select(b.modes[k], cov * gains[k])).samples for k in range(rep.k1))
        np.testing.assert_allclose(est.samples, manual, atol=1e-12)

    def test_mean_reference(self, noisy_quad):
        clean, noisy = noisy_quad
        _, rep = denoise(noisy, SMALL, clean=clean, pca_reference="mean")
        assert rep.config["pca_reference"] == "mean"
        assert all(1 <= r <= 4 for r in rep.retained_components)

    def test_snr_only_with_reference(self, noisy_quad):
        _, noisy = noisy_quad
        _, rep = denoise(noisy, SMALL)
        d = rep.to_dict()
        assert d["input_snr_db"] is None and d["output_snr_db"] is None

    def test_json_schema(self, noisy_quad):
        clean, noisy = noisy_quad
        _, rep = denoise(noisy, SMALL, clean=clean)
        d = json.loads(rep.to_json())
        assert set(d) >= {"alphas", "betas", "k1", "retained_components", "input_snr_db", "output_snr_db", "config"}
        assert d["config"]["mvmd"]["k"] == 6
        assert d["config"]["scales"] == list(range(4, 17))

    def test_deterministic(self, noisy_quad):
        clean, noisy = noisy_quad
        a = denoise(noisy, SMALL, clean=clean)
        b = denoise(noisy, SMALL, clean=clean)
        assert np.array_equal(a[0].samples, b[0].samples)
        assert a[1].to_json() == b[1].to_json()

    def test_noise_free_smooth_input(self):
        h = generate_test_signal("heavisine", 4096).samples[:, 0]
        clean = np.column_stack([h, 2 * h, h[::-1]])
        _, rep = denoise(clean, clean=clean)
        assert rep.output_snr.average_db >= 25

    def test_zero_input(self):
        est, rep = denoise(np.zeros((512, 3)), SMALL)
        assert not est.samples.any()
        assert all(c.degenerate for c in rep.mode_scores.curves)
        assert not any(math.isnan(a) for a in rep.mode_scores.alphas)
        json.loads(rep.to_json())

    def test_single_mode(self, noisy_quad):
        clean, noisy = noisy_quad
        est, rep = denoise(noisy, MvmdConfig(k=1), clean=clean)
        assert rep.k1 == 1 and rep.mode_scores.betas == ()
        assert est.shape == noisy.shape

    def test_bad_arguments(self, noisy_quad):
        _, noisy = noisy_quad
        with pytest.raises(DataError):
            denoise(noisy, SMALL, pca_reference="median")
        with pytest.raises(DataError):
            denoise(noisy.samples[:40], SMALL)


class TestTargets:
    def test_unbalanced_three(self):
        assert unbalanced_targets(10.0, 3) == (9.0, 10.0, 11.0)

    def test_unbalanced_mean(self):
        t = unbalanced_targets(6.0, 4)
        assert t == (4.5, 5.5, 6.5, 7.5)
        assert np.mean(t) == pytest.approx(6.0)

    def test_balanced(self):
        assert noise_targets(-2.0, 4, balanced=True) == (-2.0,) * 4


class TestBenchmark:
    def test_single_point(self):
        clean = make_quadrivariate(1024)
        res = benchmark(clean, [10.0], [0], mvmd_config=SMALL)
        assert len(res.rows) == 1
        assert res.rows[0].report.input_snr.average_db == pytest.approx(10.0, abs=1e-12)
        assert res.summary()[0]["runs"] == 1

    def test_grid_and_workers(self):
        clean = make_quadrivariate(512)
        cfg = MvmdConfig(k=4)
        serial = benchmark(clean, [-2.0, 2.0], [0, 1], mvmd_config=cfg, balanced=False)
        pooled = benchmark(clean, [-2.0, 2.0], [0, 1], mvmd_config=cfg, balanced=False, workers=2)
        assert serial.grid() == [-2.0, 2.0]
        assert json.dumps(serial.to_dict()) == json.dumps(pooled.to_dict())
        per_channel = serial.rows[0].report.input_snr.per_channel_db
        np.testing.assert_allclose(per_channel, [-3.5, -2.5, -1.5, -0.5], atol=1e-9)

    def test_paired_variants(self):
        from mvdenoise.signal import make_mixed_surrogate

        clean = make_mixed_surrogate(1024)
        a = benchmark(clean, [10.0], [3], variant="mahalanobis", mvmd_config=SMALL)
        b = benchmark(clean, [10.0], [3], variant="euclidean", mvmd_config=SMALL)
        assert a.rows[0].report.input_snr == b.rows[0].report.input_snr
        assert a.rows[0].report.config["variant"] == "mahalanobis"
        assert b.rows[0].report.config["variant"] == "euclidean"

    def test_errors(self):
        clean = make_quadrivariate(512)
        with pytest.raises(DataError):
            benchmark(clean, [10.0], [])
        with pytest.raises(DataError):
            benchmark(clean, [math.inf], [0])
