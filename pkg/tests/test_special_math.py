"""Special-function accuracy against high-precision references.

Frozen expected values were computed with mpmath at 40 digits before the
implementation existed; grid comparisons use scipy.special, which shares
no code with this package.
"""

import numpy as np
import pytest
import scipy.special as sps

from simplexrl.special_math import digamma, ln_gamma, softplus_plus_one, trigamma

# mpmath references (40 digits, truncated to double precision)
LN_GAMMA_HALF = 0.5723649429247001
DIGAMMA_1 = -0.5772156649015329
DIGAMMA_2 = 0.4227843350984671
TRIGAMMA_1 = 1.6449340668482264
TRIGAMMA_2 = 0.6449340668482264


class TestLnGamma:
    def test_integer_zeros(self):
        assert abs(ln_gamma(1.0)) < 1e-13
        assert abs(ln_gamma(2.0)) < 1e-13

    def test_half(self):
        assert ln_gamma(0.5) == pytest.approx(LN_GAMMA_HALF, rel=1e-13)

    def test_grid_against_scipy(self):
        # Relative accuracy across the working range. Near the zeros of
        # ln Gamma (x = 1, 2) no double-precision code can hold a relative
        # bound, so those neighborhoods are held to absolute accuracy.
        x = np.geomspace(1e-3, 1e6, 4000)
        ref = sps.gammaln(x)
        got = ln_gamma(x)
        mask = np.abs(ref) > 1e-2
        rel = np.abs(got[mask] - ref[mask]) / np.abs(ref[mask])
        assert rel.max() < 1e-12
        assert np.all(np.abs(got[~mask] - ref[~mask]) < 1e-13)

    def test_rejects_bad_input(self):
        for bad in (0.0, -1.0, np.nan, np.inf, 1e-301):
            with pytest.raises(ValueError):
                ln_gamma(bad)


class TestDigamma:
    def test_euler_mascheroni(self):
        assert digamma(1.0) == pytest.approx(DIGAMMA_1, rel=1e-12)
        assert digamma(2.0) == pytest.approx(DIGAMMA_2, rel=1e-12)

    def test_asymptotic(self):
        assert digamma(1e6) == pytest.approx(np.log(1e6), abs=1e-6)

    def test_recurrence(self):
        x = np.linspace(0.01, 100.0, 20000)
        lhs = digamma(x + 1.0) - digamma(x) - 1.0 / x
        assert np.abs(lhs).max() < 1e-9

    def test_matches_ln_gamma_derivative(self):
        x = np.geomspace(0.05, 500.0, 300)
        h = 1e-5
        fd = (ln_gamma(x + h) - ln_gamma(x - h)) / (2 * h)
        rel = np.abs(fd - digamma(x)) / np.maximum(np.abs(digamma(x)), 1e-3)
        assert rel.max() < 1e-5

    def test_grid_against_scipy(self):
        x = np.geomspace(1e-3, 1e6, 4000)
        ref = sps.digamma(x)
        rel = np.abs(digamma(x) - ref) / np.abs(ref)
        assert rel[np.abs(ref) > 1e-6].max() < 1e-10


class TestTrigamma:
    def test_reference_points(self):
        assert trigamma(1.0) == pytest.approx(TRIGAMMA_1, rel=1e-12)
        assert trigamma(2.0) == pytest.approx(TRIGAMMA_2, rel=1e-12)

    def test_vanishes_at_infinity(self):
        assert trigamma(1e8) < 1e-7

    def test_recurrence(self):
        x = np.linspace(0.01, 100.0, 20000)
        lhs = trigamma(x + 1.0) - trigamma(x) + 1.0 / (x * x)
        assert np.abs(lhs).max() < 1e-9

    def test_positive_and_decreasing(self):
        x = np.geomspace(1e-2, 1e4, 5000)
        y = trigamma(x)
        assert np.all(y > 0)
        assert np.all(np.diff(y) < 0)

    def test_grid_against_scipy(self):
        x = np.geomspace(1e-3, 1e6, 4000)
        ref = sps.polygamma(1, x)
        rel = np.abs(trigamma(x) - ref) / np.abs(ref)
        assert rel.max() < 1e-10


class TestSoftplusPlusOne:
    def test_at_zero(self):
        assert softplus_plus_one(0.0) == pytest.approx(1.0 + np.log(2.0), abs=1e-12)

    def test_tails(self):
        assert softplus_plus_one(-40.0) == pytest.approx(1.0, abs=1e-12)
        assert softplus_plus_one(40.0) == pytest.approx(41.0, abs=1e-12)

    def test_lower_bound_and_monotone(self):
        x = np.linspace(-500, 500, 10001)
        assert np.all(softplus_plus_one(x) >= 1.0)
        # strict monotonicity holds wherever the increment resolves in float64
        x = np.linspace(-30, 80, 10001)
        assert np.all(np.diff(softplus_plus_one(x)) > 0)

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            softplus_plus_one(np.inf)
