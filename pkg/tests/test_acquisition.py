import numpy as np
import pytest
from scipy.stats import norm

from tunekit.rng import derive
from tunekit.tuners.acquisition import (
    draw_qlcb_kappas,
    expected_improvement,
    lcb_utility,
)


def ei_monte_carlo(mean, sd, c_min, n=200_000, seed=0):
    draws = derive(seed, "mc").normal(mean, sd, size=n)
    return float(np.mean(np.maximum(c_min - draws, 0.0)))


class TestExpectedImprovement:
    def test_deterministic_limit(self):
        assert expected_improvement(np.asarray([0.5]), np.asarray([0.0]), 1.0)[0] == 0.5
        assert expected_improvement(np.asarray([1.5]), np.asarray([0.0]), 1.0)[0] == 0.0

    def test_at_incumbent_mean(self):
        got = expected_improvement(np.asarray([1.0]), np.asarray([1.0]), 1.0)[0]
        assert got == pytest.approx(norm.pdf(0.0), abs=1e-12)

    def test_against_monte_carlo(self):
        rng = derive(1, "mc")
        for trial in range(10):
            mean = float(rng.uniform(-2, 2))
            sd = float(rng.uniform(0.05, 2.0))
            c_min = float(rng.uniform(-2, 2))
            analytic = expected_improvement(np.asarray([mean]), np.asarray([sd]), c_min)[0]
            mc = ei_monte_carlo(mean, sd, c_min, seed=trial)
            assert analytic == pytest.approx(mc, abs=2e-2)

    def test_monotone_decreasing_in_mean(self):
        means = np.linspace(-2, 2, 41)
        ei = expected_improvement(means, np.full(41, 0.7), 0.0)
        assert np.all(np.diff(ei) < 0)

    def test_monotone_increasing_in_sd_when_mean_above_incumbent(self):
        sds = np.linspace(0.01, 3, 40)
        ei = expected_improvement(np.full(40, 0.5), sds, 0.0)
        assert np.all(np.diff(ei) > 0)

    def test_vectorized_mixed_zeros(self):
        out = expected_improvement(np.asarray([0.0, 2.0]), np.asarray([0.0, 1.0]), 1.0)
        assert out[0] == 1.0 and out[1] > 0.0


class TestLCB:
    def test_kappa_zero_pure_exploitation(self):
        means = np.asarray([1.0, 2.0])
        assert np.array_equal(lcb_utility(means, np.asarray([5.0, 5.0]), 0.0), -means)

    def test_constant_shift_preserves_argmax(self):
        rng = derive(2, "lcb")
        means = rng.normal(size=30)
        sds = rng.uniform(0.1, 1.0, 30)
        u1 = lcb_utility(means, sds, 1.7)
        u2 = lcb_utility(means + 5.0, sds, 1.7)
        assert np.argmax(u1) == np.argmax(u2)
        assert np.allclose(u2 - u1, -5.0)

    def test_uncertainty_bonus(self):
        # same mean, larger sd wins under positive kappa
        u = lcb_utility(np.asarray([1.0, 1.0]), np.asarray([0.1, 1.0]), 2.0)
        assert u[1] > u[0]


class TestQLCB:
    def test_draws_exponential_rate_one(self):
        ks = draw_qlcb_kappas(200_000, derive(3, "q"))
        assert np.all(ks >= 0)
        assert np.mean(ks) == pytest.approx(1.0, abs=0.02)
        assert np.std(ks) == pytest.approx(1.0, abs=0.02)

    def test_distinct_per_slot(self):
        ks = draw_qlcb_kappas(3, derive(4, "q"))
        assert len(set(ks.tolist())) == 3
