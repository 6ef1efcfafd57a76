import math

import numpy as np
import pytest
from scipy import integrate, stats

from partialvar import CapabilityError, ConstraintSpec, DomainError, Prior, Utility, solve
from partialvar.solver import terminal_wealth_y
from partialvar.strategy import StrategyContext, h, h_y, pi_star, strategy_grid, wealth_process, write_strategy_csv

from conftest import L_BENCH


@pytest.fixture(scope="module")
def ctx3(prior, params, sol_g3):
    return StrategyContext.build(sol_g3, prior, params, Utility.power(3))


@pytest.fixture(scope="module")
def ctx_merton_point(params):
    p = Prior.point(0.25)
    u = Utility.power(3)
    s = solve(p, params, u, ConstraintSpec.unconstrained(), L_BENCH)
    return StrategyContext.build(s, p, params, u)


def quad_h(ctx, t, y):
    """Adaptive-quadrature oracle for the discounted conditional expectation."""
    sd = math.sqrt(ctx.params.T - t)
    f = lambda z: terminal_wealth_y(ctx.solution, ctx.prior, ctx.params, ctx.utility, y + sd * z) * stats.norm.pdf(z)
    edges = [-12.0]
    if ctx.has_flat:
        edges += sorted([(ctx.y_upper_cut - y) / sd, (ctx.y_lower_cut - y) / sd])
    edges.append(14.0)
    edges = [min(max(e, -12.0), 14.0) for e in edges]
    tot = sum(integrate.quad(f, a, b, limit=400, epsabs=1e-13, epsrel=1e-13)[0]
              for a, b in zip(edges[:-1], edges[1:]) if b > a)
    return ctx.params.discount * tot


class TestInitialWealth:
    def test_budget_at_origin(self, ctx3, params):
        assert h(ctx3, 0.0, 0.0) == pytest.approx(params.x0, abs=1e-4)

    def test_gamma_two_and_q_belief(self, prior, params, sol_g2, var_q):
        c = StrategyContext.build(sol_g2, prior, params, Utility.power(2))
        assert h(c, 0.0, 0.0) == pytest.approx(params.x0, abs=1e-4)
        sq = solve(prior, params, Utility.power(3), var_q, L_BENCH)
        assert h(StrategyContext.build(sq, prior, params, Utility.power(3)), 0.0, 0.0) == pytest.approx(params.x0, abs=1e-4)


class TestAgainstOracles:
    @pytest.mark.parametrize("t,y", [(0.0, 0.0), (2.5, -3.0), (5.0, 1.0), (7.5, 2.0), (9.5, -1.0), (9.9, 0.5)])
    def test_h_matches_quadrature(self, ctx3, t, y):
        assert h(ctx3, t, y) == pytest.approx(quad_h(ctx3, t, y), rel=1e-9, abs=1e-9)

    @pytest.mark.parametrize("t", [0.0, 3.0, 6.0, 9.0, 9.9])
    def test_h_y_matches_finite_differences(self, ctx3, t):
        ys = np.linspace(-8, 12, 41)
        eps = 1e-5
        fd = (h(ctx3, t, ys + eps) - h(ctx3, t, ys - eps)) / (2 * eps)
        np.testing.assert_allclose(h_y(ctx3, t, ys), fd, atol=1e-5)

    def test_merton_closed_form(self, ctx_merton_point, params):
        theta, g = 0.25, 3.0
        lam = ctx_merton_point.solution.lambda1
        for t in (0.0, 4.0, 9.0):
            for y in (-2.0, 0.0, 3.0):
                # X_t = B_t * E_Q[B_T^{-1} I(lam xi_T)] in closed form
                tau = params.T - t
                log_xt = (params.r * t - params.r * params.T - math.log(lam) / g + params.r * params.T / g
                          + (theta * y - 0.5 * theta**2 * params.T) / g + 0.5 * (theta / g) ** 2 * tau)
                X = wealth_process(ctx_merton_point, t, y)
                assert X == pytest.approx(math.exp(log_xt), rel=1e-9)
                assert pi_star(ctx_merton_point, t, y) / X == pytest.approx(theta / (g * params.sigma), abs=1e-6)

    def test_merton_mixture_fraction_is_filtered_drift(self, prior, params):
        u = Utility.power(3)
        s = solve(prior, params, u, ConstraintSpec.unconstrained(), L_BENCH)
        c = StrategyContext.build(s, prior, params, u)
        # pi/X lies strictly between the extreme point fractions
        for t, y in ((0.0, 0.0), (5.0, 4.0), (9.0, -3.0)):
            frac = pi_star(c, t, y) / wealth_process(c, t, y)
            assert 0.15 / (3 * 0.2) < frac < 0.35 / (3 * 0.2)


class TestProperties:
    def test_near_horizon_limit(self, ctx3, prior, params, sol_g3):
        ys = np.array([-6.0, -3.0, -1.0, 2.0, 6.0])
        # away from the cuts the conditional expectation collapses to the terminal map
        near = h(ctx3, params.T - 1e-8, ys) / params.discount
        np.testing.assert_allclose(near, terminal_wealth_y(sol_g3, prior, params, Utility.power(3), ys), rtol=1e-6)

    def test_nonnegative_stock_holding(self, ctx3):
        for t in (0.0, 2.0, 5.0, 8.0, 9.5, 9.99):
            assert np.all(h_y(ctx3, t, np.linspace(-12, 15, 200)) >= -1e-9)

    def test_flat_region_unhedged_near_horizon(self, ctx3, params):
        mid = 0.5 * (ctx3.y_upper_cut + ctx3.y_lower_cut)
        assert abs(pi_star(ctx3, params.T - 1e-3, mid)) < 1e-6

    def test_q_martingale(self, ctx3):
        t1, t2, y = 3.0, 7.0, 0.5
        s = math.sqrt(t2 - t1)
        z, w = np.polynomial.hermite_e.hermegauss(120)
        mean = np.sum(w * h(ctx3, t2, y + s * z)) / math.sqrt(2 * math.pi)
        assert mean == pytest.approx(h(ctx3, t1, y), rel=1e-6)


class TestRefusals:
    def test_pi_near_horizon(self, ctx3, params):
        with pytest.raises(DomainError):
            pi_star(ctx3, params.T - 1e-7, 0.0)
        with pytest.raises(DomainError):
            h(ctx3, params.T, 0.0)
        with pytest.raises(DomainError):
            h(ctx3, -1.0, 0.0)

    def test_log_utility(self, prior, params, var_p):
        s = solve(prior, params, Utility.log(), var_p, L_BENCH)
        with pytest.raises(CapabilityError):
            StrategyContext.build(s, prior, params, Utility.log())

    def test_negative_prior_values(self, params, sol_g3):
        with pytest.raises(CapabilityError):
            StrategyContext.build(sol_g3, Prior([-0.1, 0.3], [0.5, 0.5]), params, Utility.power(3))


def test_grid_csv(ctx3, tmp_path):
    rows = strategy_grid(ctx3, [0.0, 5.0], np.linspace(-1, 1, 3))
    assert len(rows) == 6
    path = tmp_path / "s.csv"
    write_strategy_csv(rows, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "t,y,X_t,pi_t"
    assert float(lines[2].split(",")[2]) == pytest.approx(100.0, abs=1e-4)
