import numpy as np
import pytest
from hypothesis import given, strategies as st

from mvdenoise.dfa import (
    DEFAULT_SCALES,
    detrend,
    dfa_univariate,
    fluctuation_curve,
    fluctuation_euclidean,
    fluctuation_mahalanobis,
    fluctuation_univariate,
    mdfa,
    mdfa_euclidean,
    profile,
    scaling_exponent,
    segment,
)
from mvdenoise.errors import DataError
from mvdenoise.linalg import detrend_operator


def brute_profile(x):
    x = np.asarray(x, float)
    n, m = x.shape
    out = np.zeros((n, m))
    for j in range(m):
        mean = sum(x[:, j]) / n
        acc = 0.0
        for i in range(n):
            acc += x[i, j] - mean
            out[i, j] = acc / n
    return out


def brute_segments(n, s):
    ns = n // s
    head = [(v * s + 1, (v + 1) * s) for v in range(ns)]
    tail = [(n - (v + 1) * s + 1, n - v * s) for v in reversed(range(ns))]
    return head + tail


def brute_residuals(y, s):
    """Per-segment quadratic fit residuals with np.polyfit, one channel at a time."""
    out = []
    i = np.arange(1, s + 1)
    for a, b in brute_segments(y.shape[0], s):
        seg = y[a - 1:b]
        res = np.empty_like(seg)
        for j in range(seg.shape[1]):
            res[:, j] = seg[:, j] - np.polyval(np.polyfit(i, seg[:, j], 2), i)
        out.append(res)
    return np.array(out)


def white_noise_alpha_oracle(scales, order=2):
    """Expected-F slope for unit white noise: the profile inside a segment is a
    random walk with covariance min(i, j); the fit removes a polynomial."""
    f2 = []
    for s in scales:
        i = np.arange(1, s + 1)
        w = np.minimum.outer(i, i).astype(float)
        f2.append(np.trace(detrend_operator(s, order) @ w) / s)
    slope, _ = np.polyfit(np.log(scales), 0.5 * np.log(f2), 1)
    return slope


class TestProfile:
    def test_constant(self):
        assert not profile(np.full((10, 2), 3.7)).values.any()

    def test_alternating(self):
        np.testing.assert_allclose(profile([1.0, -1.0, 1.0, -1.0]).values[:, 0], [0.25, 0.0, 0.25, 0.0])

    def test_brute_force(self):
        x = np.random.default_rng(0).standard_normal((200, 3))
        np.testing.assert_allclose(profile(x).values, brute_profile(x), atol=1e-12)

    @given(st.integers(0, 2**32 - 1))
    def test_ends_at_zero(self, seed):
        x = np.random.default_rng(seed).standard_normal((64, 2)) * 100
        prof = profile(x)
        assert prof.values.shape == x.shape
        np.testing.assert_allclose(prof.values[-1], 0.0, atol=1e-9)

    def test_errors(self):
        with pytest.raises(DataError):
            profile([1.0])
        with pytest.raises(DataError):
            profile([[1.0], [np.nan]])


class TestSegment:
    def test_divides(self):
        lay = segment(16, 4)
        assert lay.ranges == [(1, 4), (5, 8), (9, 12), (13, 16)] * 2

    def test_n18_s4(self):
        lay = segment(18, 4)
        assert lay.n_segments == 8
        assert lay.ranges[3] == (13, 16)
        assert lay.ranges[4] == (3, 6)
        assert lay.ranges[-1] == (15, 18)

    def test_n16_s5(self):
        lay = segment(16, 5)
        assert lay.ranges == [(1, 5), (6, 10), (11, 15), (2, 6), (7, 11), (12, 16)]

    @given(st.integers(16, 400), st.integers(4, 100))
    def test_layout_invariants(self, n, s):
        if s > n // 4:
            s = 4
        lay = segment(n, s)
        ns = n // s
        assert lay.ranges == sorted(brute_segments(n, s)[:ns]) + sorted(brute_segments(n, s)[ns:])
        assert all(b - a + 1 == s and 1 <= a and b <= n for a, b in lay.ranges)
        if n % s == 0:
            assert lay.ranges[:ns] == lay.ranges[ns:]

    def test_bad_scale(self):
        with pytest.raises(DataError):
            segment(100, 3)
        with pytest.raises(DataError):
            segment(10, 11)


class TestDetrend:
    def test_quadratic_profile(self):
        i = np.arange(1, 41, dtype=float)
        y = np.column_stack([i**2, -3 * i**2 + i, 5 + 0 * i])
        r = detrend(y, segment(40, 8))
        assert np.abs(r).max() <= 1e-9 * np.abs(y).max()

    def test_brute_force(self):
        y = profile(np.random.default_rng(1).standard_normal((103, 2))).values
        for s in (4, 7, 16):
            np.testing.assert_allclose(detrend(y, segment(103, s)), brute_residuals(y, s), atol=1e-10)

    def test_channel_shuffle(self):
        y = np.random.default_rng(2).standard_normal((64, 3))
        perm = [2, 0, 1]
        lay = segment(64, 8)
        np.testing.assert_allclose(detrend(y[:, perm], lay), detrend(y, lay)[:, :, perm], atol=1e-14)

    def test_layout_mismatch(self):
        with pytest.raises(DataError):
            detrend(np.zeros((20, 1)), segment(24, 4))


class TestFluctuations:
    def test_univariate_quadratic_input(self):
        i = np.arange(1, 101, dtype=float)
        # a linear series has a quadratic profile
        assert fluctuation_univariate(2 * i + 1, 8) == pytest.approx(0.0, abs=1e-12)

    def test_univariate_direct_sum(self):
        x = np.random.default_rng(3).standard_normal((300, 1))
        y = brute_profile(x)
        for s in (4, 9, 16):
            r = brute_residuals(y, s)
            seg_var = [np.mean(seg[:, 0] ** 2) for seg in r]
            assert fluctuation_univariate(x, s) == pytest.approx(np.sqrt(np.mean(seg_var)), rel=1e-10)

    def test_euclidean_single_channel_equals_univariate(self):
        x = np.random.default_rng(4).standard_normal(256)
        for s in (4, 10, 16):
            assert fluctuation_euclidean(x, s) == fluctuation_univariate(x, s)

    def test_euclidean_direct_sum(self):
        x = np.random.default_rng(5).standard_normal((200, 3))
        r = brute_residuals(brute_profile(x), 6)
        per_seg = [np.mean(np.sum(seg**2, axis=1)) for seg in r]
        assert fluctuation_euclidean(x, 6) == pytest.approx(np.sqrt(np.mean(per_seg)), rel=1e-10)

    def test_mahalanobis_identity_equals_euclidean(self):
        x = np.random.default_rng(6).standard_normal((256, 3))
        for s in DEFAULT_SCALES:
            f, _ = fluctuation_mahalanobis(x, s, sigma=np.eye(3))
            assert abs(f - fluctuation_euclidean(x, s)) <= 1e-12

    def test_mahalanobis_quadratic_input(self):
        i = np.arange(1, 129, dtype=float)
        x = np.column_stack([i, -2 * i + 3, 0.5 * i])
        f, _ = fluctuation_mahalanobis(x, 8)
        assert f == 0.0

    def test_mahalanobis_explicit_inverse_oracle(self):
        rng = np.random.default_rng(7)
        x = rng.standard_normal((400, 2)) @ np.array([[1.0, 0.7], [0.0, 0.5]])
        sinv = np.linalg.inv(np.cov(x.T, ddof=1))
        r = brute_residuals(brute_profile(x), 8)
        total = np.mean([np.mean([z @ sinv @ z for z in seg]) for seg in r])
        f, sigma = fluctuation_mahalanobis(x, 8)
        assert f == pytest.approx(np.sqrt(total), rel=1e-8)
        np.testing.assert_allclose(sigma.entries, np.cov(x.T, ddof=1), rtol=1e-12)

    @given(st.integers(0, 2**32 - 1))
    def test_diagonal_reduction(self, seed):
        rng = np.random.default_rng(seed)
        x = rng.standard_normal((128, 3)) * [1.0, 3.0, 0.2]
        sd = rng.uniform(0.1, 4.0, 3)
        f, _ = fluctuation_mahalanobis(x, 8, sigma=np.diag(sd**2))
        assert f == pytest.approx(fluctuation_euclidean(x / sd, 8), abs=1e-10)

    def test_mahalanobis_shape_errors(self):
        with pytest.raises(DataError):
            fluctuation_mahalanobis(np.ones((4, 3)), 4)
        x = np.random.default_rng(0).standard_normal((64, 2))
        with pytest.raises(DataError):
            fluctuation_mahalanobis(x, 8, sigma=np.eye(3))


class TestScalingExponent:
    def test_exact_power_law(self):
        s = np.arange(4, 17)
        fit = scaling_exponent(s, 3.0 * s**0.8)
        assert fit.alpha == pytest.approx(0.8, abs=1e-12)
        assert fit.residual == pytest.approx(0.0, abs=1e-12)
        assert not fit.degenerate

    def test_zero_points_dropped(self):
        s = np.arange(4, 10)
        f = s**1.5
        f[2] = 0.0
        assert scaling_exponent(s, f).alpha == pytest.approx(1.5, abs=1e-12)

    def test_all_zero_is_degenerate(self):
        fit = scaling_exponent([4, 5, 6], [0.0, 0.0, 0.0])
        assert fit == (0.0, 0.0, True)

    def test_single_positive_point(self):
        with pytest.raises(DataError):
            scaling_exponent([4, 5, 6], [0.0, 1.0, 0.0])

    def test_invalid_values(self):
        with pytest.raises(DataError):
            scaling_exponent([4, 5], [1.0, -1.0])
        with pytest.raises(DataError):
            scaling_exponent([4, 5], [1.0])


class TestCurves:
    @given(st.integers(0, 2**32 - 1), st.floats(1e-3, 1e3))
    def test_alpha_scale_invariant(self, seed, c):
        x = np.random.default_rng(seed).standard_normal((256, 2)).cumsum(axis=0)
        for fn in (mdfa, mdfa_euclidean):
            assert fn(c * x).alpha == pytest.approx(fn(x).alpha, abs=1e-9)

    def test_profile_prefactor_does_not_change_alpha(self):
        x = np.random.default_rng(8).standard_normal((512, 2))
        curve = mdfa_euclidean(x)
        # dropping the 1/N prefactor multiplies every F(s) by N
        refit = scaling_exponent(curve.scales, curve.f_values * 512)
        assert refit.alpha == pytest.approx(curve.alpha, abs=1e-9)

    def test_white_noise_matches_analytic_slope(self):
        expected = white_noise_alpha_oracle(DEFAULT_SCALES)
        uni = [dfa_univariate(np.random.default_rng(s).standard_normal(4096)).alpha for s in range(20)]
        multi = [mdfa(np.random.default_rng(100 + s).standard_normal((4096, 3))).alpha for s in range(20)]
        assert np.mean(uni) == pytest.approx(expected, abs=0.03)
        assert np.mean(multi) == pytest.approx(expected, abs=0.03)

    def test_brownian_surrogate(self):
        alphas, curves = [], []
        for seed in range(20):
            x = np.random.default_rng(seed).standard_normal((4096, 3)).cumsum(axis=0)
            c = mdfa(x)
            alphas.append(c.alpha)
            curves.append(c.f_values)
        assert 1.3 <= np.mean(alphas) <= 1.7
        assert np.all(np.diff(np.mean(curves, axis=0)) >= 0)

    def test_uncorrelated_variants_agree(self):
        x = np.random.default_rng(9).standard_normal((4096, 3)) * [1.0, 2.0, 0.5]
        assert mdfa(x).alpha == pytest.approx(mdfa_euclidean(x).alpha, abs=0.05)

    def test_curve_fields(self):
        x = np.random.default_rng(10).standard_normal((256, 2))
        c = fluctuation_curve(x, [4, 8, 16], "euclidean")
        assert c.scales == (4, 8, 16)
        assert c.points()[1][0] == 8
        d = c.to_dict()
        assert d["variant"] == "euclidean" and len(d["f_values"]) == 3

    def test_constant_signal_degenerate(self):
        c = mdfa(np.ones((128, 3)))
        assert c.degenerate and c.alpha == 0.0
        assert not c.f_values.any()

    @pytest.mark.parametrize(
        "kwargs",
        [dict(scales=[4]), dict(scales=[8, 4]), dict(scales=[3, 4]), dict(scales=[4, 40]), dict(variant="manhattan")],
    )
    def test_bad_arguments(self, kwargs):
        with pytest.raises(DataError):
            fluctuation_curve(np.random.default_rng(0).standard_normal((128, 2)), **kwargs)

    def test_univariate_needs_one_channel(self):
        with pytest.raises(DataError):
            dfa_univariate(np.zeros((64, 2)))
