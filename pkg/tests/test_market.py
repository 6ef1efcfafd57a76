import csv
import math

import numpy as np
import pytest

from partialvar import BeliefMeasure, CapabilityError, DomainError, MarketParams, Prior
from partialvar.market import (
    simulate_terminal,
    simulate_under_P,
    simulate_under_Q,
    state_price,
    xi_tail_prob,
    xi_tail_prob_mc,
)


class TestParams:
    @pytest.mark.parametrize("kw", [{"r": -0.01}, {"sigma": 0.0}, {"T": 0.0}, {"x0": -1.0}])
    def test_invalid(self, kw):
        with pytest.raises(DomainError):
            MarketParams(**kw)

    def test_belief_support(self, prior):
        b = BeliefMeasure([0.1, 0.2, 0.3], [0.2, 0.4, 0.4])
        with pytest.raises(DomainError):
            b.check_support(prior)


class TestStatePrice:
    def test_origin(self, prior, params):
        assert state_price(prior, params, 0.0, 0.0) == 1.0

    def test_point_prior(self, params):
        th, t, y = 0.3, 4.0, 1.2
        expected = math.exp(-params.r * t) * math.exp(-th * y + 0.5 * th * th * t)
        assert state_price(Prior.point(th), params, t, y) == pytest.approx(expected, rel=1e-14)

    def test_benchmark_value(self, prior, params):
        # exp(-0.3) / F(10, 0), mpmath at 30 digits
        assert state_price(prior, params, 10.0, 0.0) == pytest.approx(1.02549248564485509, rel=1e-14)

    def test_outside_horizon(self, prior, params):
        with pytest.raises(DomainError):
            state_price(prior, params, 11.0, 0.0)


class TestTail:
    def test_limits(self, prior, params):
        assert xi_tail_prob(prior, prior, params, 1e-12) == pytest.approx(1.0, abs=1e-12)
        assert xi_tail_prob(prior, prior, params, 1e12) == pytest.approx(0.0, abs=1e-12)

    def test_non_increasing(self, prior, params, robust_belief):
        xs = np.geomspace(0.01, 50, 100)
        for b in (prior, robust_belief):
            assert np.all(np.diff(xi_tail_prob(prior, b, params, xs)) <= 0)

    def test_floor_from_zero_value(self, params):
        # F >= p_1 when v_1 = 0, so xi_T < exp(-rT) / p_1 surely
        p = Prior([0.0, 0.3], [0.5, 0.5])
        cap = math.exp(-params.r * params.T) / 0.5
        assert xi_tail_prob(p, p, params, cap * 1.01) == 0.0
        assert xi_tail_prob(p, p, params, cap * 0.99) > 0.0

    def test_signed_prior_refused_with_mc_fallback(self, params):
        p = Prior([-0.1, 0.3], [0.5, 0.5])
        with pytest.raises(CapabilityError):
            xi_tail_prob(p, p, params, 1.0)
        est, se = xi_tail_prob_mc(p, p, params, 0.6, n_paths=20_000, seed=3)
        assert 0 < est < 1 and se > 0

    @pytest.mark.slow
    def test_matches_monte_carlo(self, prior, params, robust_belief):
        xs = np.linspace(0.3, 4.0, 40)
        n = 1_000_000
        for seed, b in enumerate((prior, robust_belief)):
            y, _ = simulate_terminal(b, params.T, n, seed)
            xi = state_price(prior, params, params.T, y)
            mc = np.array([(xi > x).mean() for x in xs])
            se = np.sqrt(np.maximum(mc * (1 - mc), 1e-12) / n)
            an = xi_tail_prob(prior, b, params, xs)
            assert np.max(np.abs(an - mc) / se) <= 4.0

    def test_benchmark_quantile_level(self, prior, params):
        # quoted benchmark: the 5% quantile of xi_T sits at 1.91
        assert xi_tail_prob(prior, prior, params, 1.91) == pytest.approx(0.05, abs=0.002)

    @pytest.mark.slow
    def test_benchmark_level_monte_carlo(self, prior, params):
        est, se = xi_tail_prob_mc(prior, prior, params, 1.91, n_paths=10_000_000, seed=19)
        assert abs(est - xi_tail_prob(prior, prior, params, 1.91)) <= 3 * se


class TestSimulation:
    def test_zero_theta_no_discount(self):
        p = Prior.point(0.0)
        params = MarketParams(r=0.0, T=2.0)
        with pytest.raises(CapabilityError):
            p.require_monotone()
        b = simulate_under_P(p, params, 100, 10, seed=1)
        np.testing.assert_allclose(b.xi, 1.0)

    def test_grid_invariants(self, prior, params):
        b = simulate_under_P(prior, params, 500, 20, seed=2)
        assert b.Y.shape == (500, 21) and b.t[0] == 0.0 and b.t[-1] == params.T
        np.testing.assert_array_equal(b.Y[:, 0], 0.0)
        np.testing.assert_array_equal(b.xi[:, 0], 1.0)
        assert np.all(b.xi > 0)
        np.testing.assert_allclose(b.Y, b.W + b.theta[:, None] * b.t, atol=1e-12)

    def test_q_paths(self, prior, params):
        b = simulate_under_Q(prior, params, 400, 8, seed=4)
        np.testing.assert_array_equal(b.Y[:, 0], 0.0)
        assert b.theta is None and b.measure == "Q"

    def test_seed_determinism(self, prior, params):
        a = simulate_under_P(prior, params, 70_000, 2, seed=9)
        b = simulate_under_P(prior, params, 70_000, 2, seed=9)
        np.testing.assert_array_equal(a.Y, b.Y)
        c = simulate_under_P(prior, params, 70_000, 2, seed=10)
        assert not np.array_equal(a.Y, c.Y)

    def test_blocks_are_prefix_stable(self, prior, params):
        # paths of a block do not depend on how many blocks follow
        a, _ = simulate_terminal(prior, params.T, 1 << 16, 5)
        b, _ = simulate_terminal(prior, params.T, 3 << 16, 5)
        np.testing.assert_array_equal(a, b[: 1 << 16])

    @pytest.mark.slow
    def test_martingale_and_moments(self, prior, params):
        n = 1_000_000
        y, th = simulate_terminal(prior, params.T, n, 11)
        nu = state_price(prior, params, params.T, y) * math.exp(params.r * params.T)
        assert abs(nu.mean() - 1.0) <= 3 * nu.std() / math.sqrt(n)
        assert abs(th.mean() - 0.25) <= 3 * th.std() / math.sqrt(n)
        yq, _ = simulate_terminal(None, params.T, n, 12)
        var_se = params.T * math.sqrt(2.0 / n)
        assert abs(yq.var() - params.T) <= 3 * var_se

    def test_csv_export(self, prior, params, tmp_path):
        b = simulate_under_P(prior, params, 5, 3, seed=0)
        b.X = b.xi * 0 + 100.0
        b.to_csv(tmp_path / "paths.csv")
        rows = list(csv.reader(open(tmp_path / "paths.csv")))
        assert rows[0] == ["path", "theta", "Y_T", "xi_T", "X_T"]
        assert len(rows) == 6
        assert float(rows[1][3]) == pytest.approx(b.xi[0, -1])

    def test_stock_diagnostic(self, prior, params):
        b = simulate_under_P(prior, params, 3, 4, seed=0)
        S = b.stock(params, s0=100.0)
        np.testing.assert_array_equal(S[:, 0], 100.0)
