"""Multivariate normal CDF: closed-form identities, MC oracle, derivative kernels."""
from __future__ import annotations

import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from putbond.errors import BudgetExceeded, NonIncreasingTimes, NotPositiveDefinite
from putbond.mvncdf import (
    CorrelationSpec,
    MvnAccuracy,
    build_correlation,
    mvn_cdf,
    mvn_cdf_batch,
    mvn_cdf_partial,
)

ACC = MvnAccuracy()
# Forces every refinement level so paired calls share identical point sets.
ACC_FULL = MvnAccuracy(abs_tol=1e-30, max_points=1 << 19, seed=77)


def sqrt_time_corr(n, flip_last=False):
    return build_correlation([float(k) for k in range(1, n + 1)], 0.0, flip_last=flip_last)


class TestBuildCorrelation:
    def test_two_dates(self):
        corr = build_correlation([1.0, 2.0], 0.0)
        assert corr.matrix()[0, 1] == pytest.approx(math.sqrt(0.5), abs=1e-15)

    def test_flip_negates_last_row_and_column(self):
        corr = build_correlation([1.0, 2.0, 3.0], 0.0, flip_last=True)
        m = corr.matrix()
        assert m[0, 2] == pytest.approx(-math.sqrt(1.0 / 3.0), abs=1e-15)
        assert m[1, 2] == pytest.approx(-math.sqrt(2.0 / 3.0), abs=1e-15)
        assert m[0, 1] == pytest.approx(math.sqrt(0.5), abs=1e-15)
        assert np.allclose(m, m.T)

    def test_single_date_is_identity(self):
        assert build_correlation([2.0], 0.0).matrix().tolist() == [[1.0]]

    def test_rejects_bad_times(self):
        with pytest.raises(NonIncreasingTimes):
            build_correlation([2.0, 1.0], 0.0)
        with pytest.raises(NonIncreasingTimes):
            build_correlation([1.0, 2.0], 1.0)

    @pytest.mark.parametrize("n", [2, 3, 5, 8])
    @pytest.mark.parametrize("flip", [False, True])
    def test_positive_definite(self, n, flip):
        m = sqrt_time_corr(n, flip).matrix()
        np.linalg.cholesky(m)  # raises if not SPD


class TestUnivariate:
    def test_half_at_zero(self):
        assert mvn_cdf([0.0], CorrelationSpec(times=(1.0,)), ACC) == 0.5

    @pytest.mark.parametrize("x", [-6.0, -2.5, -0.3, 0.0, 0.7, 1.9, 5.5])
    def test_matches_high_precision_reference(self, x):
        ref = float(mpmath.ncdf(x))
        assert abs(mvn_cdf([x], CorrelationSpec(times=(1.0,)), ACC) - ref) < 1e-15


class TestBivariate:
    def test_orthant_closed_form(self):
        # P(X<=0, Y<=0) = 1/4 + arcsin(rho) / (2 pi)
        val = mvn_cdf([0.0, 0.0], sqrt_time_corr(2), ACC)
        exact = 0.25 + math.asin(math.sqrt(0.5)) / (2.0 * math.pi)
        assert exact == 0.375
        assert abs(val - exact) < 1e-13

    def test_total_mass(self):
        assert mvn_cdf([np.inf, np.inf], sqrt_time_corr(2), ACC) == pytest.approx(1.0, abs=1e-12)

    def test_minus_infinity_kills_mass(self):
        assert mvn_cdf([-np.inf, 1.0], sqrt_time_corr(2), ACC) == pytest.approx(0.0, abs=1e-15)

    def test_flip_identity(self):
        # joint(a, b | flipped) + joint(a, -b | plain) = marginal(a)
        from scipy.special import ndtr

        for a, b in [(0.3, -0.7), (-1.1, 0.4), (2.0, 2.5), (0.0, 0.0)]:
            lhs = mvn_cdf([a, b], sqrt_time_corr(2, True), ACC) + mvn_cdf(
                [a, -b], sqrt_time_corr(2), ACC
            )
            assert lhs == pytest.approx(float(ndtr(a)), abs=2 * ACC.abs_tol)

    def test_symmetric_in_arguments_when_corr_symmetric(self):
        m = sqrt_time_corr(2).matrix()
        v1 = mvn_cdf_batch(np.array([[0.7, -0.2]]), m, ACC)[0]
        v2 = mvn_cdf_batch(np.array([[-0.2, 0.7]]), m, ACC)[0]
        assert v1 == pytest.approx(v2, abs=1e-13)


class TestMonteCarloOracle:
    @pytest.mark.parametrize("n,limits", [
        (2, (0.4, -0.2)),
        (3, (0.5, -0.3, 0.8)),
        (4, (0.5, -0.3, 0.8, 0.1)),
    ])
    def test_within_three_standard_errors(self, n, limits):
        corr = sqrt_time_corr(n)
        with np.errstate(all="ignore"):
            import warnings as _w

            with _w.catch_warnings():
                _w.simplefilter("ignore", BudgetExceeded)
                val = mvn_cdf(list(limits), corr, ACC)
        chol = np.linalg.cholesky(corr.matrix())
        rng = np.random.default_rng(20_240_601 + n)
        total, hits = 0, 0
        for _ in range(10):
            z = rng.standard_normal((1_000_000, n))
            hits += int(np.all(z @ chol.T <= np.asarray(limits), axis=1).sum())
            total += 1_000_000
        p = hits / total
        se = math.sqrt(p * (1.0 - p) / total)
        assert abs(val - p) <= 3.0 * se

    def test_flipped_matrix_against_mc(self):
        corr = sqrt_time_corr(3, flip_last=True)
        val = mvn_cdf([0.6, 0.2, -0.4], corr, ACC)
        chol = np.linalg.cholesky(corr.matrix())
        rng = np.random.default_rng(99)
        z = rng.standard_normal((4_000_000, 3))
        p = float(np.all(z @ chol.T <= np.array([0.6, 0.2, -0.4]), axis=1).mean())
        se = math.sqrt(p * (1 - p) / 4_000_000)
        assert abs(val - p) <= 3.0 * se


class TestProperties:
    @given(st.floats(-3.0, 3.0), st.floats(-3.0, 3.0), st.floats(0.05, 0.95))
    @settings(max_examples=40, deadline=None)
    def test_bounds_and_monotonicity_bivariate(self, a, b, ratio):
        corr = CorrelationSpec(times=(ratio, 1.0))
        lo = mvn_cdf([a, b], corr, ACC)
        hi = mvn_cdf([a + 0.5, b], corr, ACC)
        assert 0.0 <= lo <= 1.0
        assert hi >= lo - 1e-12

    def test_monotone_in_each_limit_trivariate(self):
        corr = sqrt_time_corr(3)
        base = mvn_cdf([0.2, 0.1, -0.3], corr, ACC)
        for i in range(3):
            lim = [0.2, 0.1, -0.3]
            lim[i] += 0.4
            assert mvn_cdf(lim, corr, ACC) >= base - 1e-9

    def test_determinism_per_seed(self):
        corr = sqrt_time_corr(3)
        a = mvn_cdf([0.5, -0.3, 0.8], corr, MvnAccuracy(seed=5))
        b = mvn_cdf([0.5, -0.3, 0.8], corr, MvnAccuracy(seed=5))
        c = mvn_cdf([0.5, -0.3, 0.8], corr, MvnAccuracy(seed=6))
        assert a == b
        assert a != c  # different lattice, same value to tolerance
        assert a == pytest.approx(c, abs=3 * ACC.abs_tol)

    def test_budget_exceeded_warns_and_returns_estimate(self):
        corr = sqrt_time_corr(4)
        tight = MvnAccuracy(abs_tol=1e-12, max_points=1 << 14, seed=3)
        with pytest.warns(BudgetExceeded):
            val = mvn_cdf([0.5, -0.3, 0.8, 0.1], corr, tight)
        assert 0.0 < val < 1.0

    def test_not_positive_definite_rejected(self):
        bad = np.array([[1.0, 0.9, 0.1], [0.9, 1.0, -0.9], [0.1, -0.9, 1.0]])
        with pytest.raises(NotPositiveDefinite):
            mvn_cdf_batch(np.zeros((1, 3)), bad, ACC)


class TestPartialKernels:
    def test_one_dimensional_kernel_is_the_density(self):
        val = mvn_cdf_partial([0.0], CorrelationSpec(times=(1.0,)), 1, ACC)
        assert val == pytest.approx(1.0 / math.sqrt(2.0 * math.pi), abs=1e-15)
        assert val == pytest.approx(0.39894228, abs=1e-8)

    def test_infinite_pin_vanishes(self):
        corr = sqrt_time_corr(3)
        assert mvn_cdf_partial([0.5, -np.inf, 0.2], corr, 2, ACC) == 0.0

    def test_bivariate_slope_against_finite_difference(self):
        corr = sqrt_time_corr(2)
        h = 1e-5
        up = mvn_cdf([h, h], corr, ACC)
        dn = mvn_cdf([-h, -h], corr, ACC)
        fd = (up - dn) / (2.0 * h)
        analytic = sum(mvn_cdf_partial([0.0, 0.0], corr, i, ACC) for i in (1, 2))
        assert analytic == pytest.approx(fd, rel=1e-6)

    @pytest.mark.parametrize("n", [2, 3, 4, 5])
    @pytest.mark.parametrize("flip", [False, True])
    def test_derivative_identity_along_diagonal(self, n, flip):
        # d/dx N_n(x + c_1, ..., x + c_n) equals the sum of pinned kernels.
        corr = sqrt_time_corr(n, flip)
        offsets = np.linspace(-0.4, 0.5, n)
        x0, h = 0.2, 1e-5
        import warnings as _w

        with _w.catch_warnings():
            _w.simplefilter("ignore", BudgetExceeded)
            up = mvn_cdf(offsets + x0 + h, corr, ACC_FULL)
            dn = mvn_cdf(offsets + x0 - h, corr, ACC_FULL)
            fd = (up - dn) / (2.0 * h)
            analytic = sum(
                mvn_cdf_partial(offsets + x0, corr, i, ACC_FULL) for i in range(1, n + 1)
            )
        assert analytic == pytest.approx(fd, rel=1e-4)
