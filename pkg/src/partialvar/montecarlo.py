"""Simulation-based checks of a calibrated solution.

These are deliberately independent of the quadrature used for calibration:
terminal observations are sampled directly, and the replication check runs a
discrete hedge along simulated Q-paths.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from numpy.typing import NDArray

from .errors import DomainError
from .filter import Prior
from .market import BeliefMeasure, MarketParams, _block_rngs, simulate_terminal, state_price
from .solver import ConstraintSpec, Solution, solve, terminal_wealth_y
from .strategy import StrategyContext, h_y
from .utility import Utility

DEFAULT_PATHS = 1_000_000


def check_constraint(
    solution: Solution, prior: Prior, belief: Prior, params: MarketParams, utility: Utility,
    n_paths: int = DEFAULT_PATHS, seed: int = 0,
) -> tuple[float, float]:
    """Empirical ``P_belief(X*_T >= L)`` and its binomial standard error."""
    y, _ = simulate_terminal(belief, params.T, n_paths, seed)
    X = terminal_wealth_y(solution, prior, params, utility, y)
    est = float(np.count_nonzero(X >= solution.L)) / n_paths
    return est, math.sqrt(est * (1.0 - est) / n_paths)


def check_budget(
    solution: Solution, prior: Prior, params: MarketParams, utility: Utility,
    n_paths: int = DEFAULT_PATHS, seed: int = 0,
) -> tuple[float, float]:
    """Empirical ``E_P[xi_T X*_T]`` with theta drawn from the prior."""
    y, _ = simulate_terminal(prior, params.T, n_paths, seed)
    v = state_price(prior, params, params.T, y) * terminal_wealth_y(solution, prior, params, utility, y)
    return float(v.mean()), float(v.std(ddof=1) / math.sqrt(n_paths))


@dataclass
class ReplicationReport:
    steps: list[int]
    rms: list[float]
    factors: list[float]
    n_paths: int
    seed: int

    @property
    def decreasing(self) -> bool:
        return all(f < 1.0 for f in self.factors)

    def factors_within(self, lo: float = 0.4, hi: float = 0.7) -> bool:
        return all(lo <= f <= hi for f in self.factors)


def replication_errors(
    ctx: StrategyContext, n_paths: int, n_steps: int, seed: int = 0,
    coarsen: Sequence[int] = (1,), strategy: str = "optimal",
) -> list[float]:
    """RMS terminal hedging error for each coarsening of one fine Brownian mesh.

    Discounted wealth follows ``dXhat = h_y(t, Y) dY`` under Q (equivalently
    ``(pi / B) sigma dY``).  ``strategy="zero"`` holds no stock at all.
    """
    params = ctx.params
    dt = params.T / n_steps
    dY = np.concatenate([
        math.sqrt(dt) * rng.standard_normal((n, n_steps)) for rng, n in _block_rngs(seed, n_paths)
    ])
    y_T = dY.sum(axis=1)
    target = terminal_wealth_y(ctx.solution, ctx.prior, params, ctx.utility, y_T)
    out = []
    for c in coarsen:
        if n_steps % c:
            raise DomainError(f"{n_steps} steps cannot be coarsened by {c}")
        inc = dY.reshape(n_paths, n_steps // c, c).sum(axis=2)
        Y = np.zeros(n_paths)
        X = np.full(n_paths, params.x0)
        for i in range(inc.shape[1]):
            if strategy == "optimal":
                X += h_y(ctx, i * c * dt, Y) * inc[:, i]
            Y += inc[:, i]
        err = X * math.exp(params.r * params.T) - target
        out.append(float(np.sqrt(np.mean(err * err))))
    return out


def check_replication(
    ctx: StrategyContext, n_paths: int = 10_000, steps: Sequence[int] = (250, 500, 1000), seed: int = 0
) -> ReplicationReport:
    """Step-halving study on nested meshes (coarser meshes aggregate the finest increments)."""
    steps = sorted(steps)
    fine = steps[-1]
    rms = replication_errors(ctx, n_paths, fine, seed, coarsen=[fine // s for s in steps])
    factors = [b / a for a, b in zip(rms[:-1], rms[1:])]
    return ReplicationReport(list(steps), rms, factors, n_paths, seed)


def is_fsd_ordered(lower: Prior, upper: Prior, tol: float = 1e-12) -> bool:
    """``lower <=_FSD upper`` on a common sorted support."""
    if lower.values != upper.values:
        return False
    return bool(np.all(np.cumsum(lower.p) >= np.cumsum(upper.p) - tol))


def random_fsd_pairs(prior: Prior, n: int, seed: int = 0) -> list[tuple[BeliefMeasure, BeliefMeasure]]:
    """Belief pairs ordered by construction: the second moves mass upward from the first."""
    rng = np.random.default_rng(seed)
    m = len(prior.values)
    pairs = []
    for _ in range(n):
        q = rng.dirichlet(np.full(m, 2.0))
        q = np.maximum(q, 1e-3)
        q /= q.sum()
        q2 = q.copy()
        for _ in range(rng.integers(1, 4)):
            i, j = sorted(rng.choice(m, size=2, replace=False))
            moved = rng.uniform(0.0, 0.9) * q2[i]
            q2[i] -= moved
            q2[j] += moved
        q2 /= q2.sum()
        q /= q.sum()
        pairs.append((BeliefMeasure(prior.values, q), BeliefMeasure(prior.values, q2)))
    return pairs


@dataclass
class FSDCase:
    lower: list[float]
    upper: list[float]
    xi_upper: tuple[float, float]
    lambda1: tuple[float, float]
    xi_lower: tuple[float, float]
    ok: bool


def check_fsd(
    prior: Prior, params: MarketParams, utility: Utility, L: float,
    belief_pairs: Sequence[tuple[Prior, Prior]], beta: float,
) -> list[FSDCase]:
    """Comparative statics for each pair ``lower <=_FSD upper``.

    Expected: ``xi_upper >= xi_upper'``, ``lambda1 >= lambda1'`` and
    ``xi_lower <= xi_lower'``.
    """
    cases = []
    for lower, upper in belief_pairs:
        if not is_fsd_ordered(lower, upper):
            raise DomainError(f"pair is not FSD-ordered: {lower.probs} vs {upper.probs}")
        s1 = solve(prior, params, utility, ConstraintSpec.var(BeliefMeasure.of(lower), beta), L)
        s2 = solve(prior, params, utility, ConstraintSpec.var(BeliefMeasure.of(upper), beta), L)
        # relative slack for identical beliefs solved through the same path
        tol = 1e-9
        ok = (s1.xi_upper >= s2.xi_upper * (1 - tol)
              and s1.lambda1 >= s2.lambda1 * (1 - tol)
              and s1.xi_lower <= s2.xi_lower * (1 + tol))
        cases.append(FSDCase(list(lower.probs), list(upper.probs), (s1.xi_upper, s2.xi_upper),
                             (s1.lambda1, s2.lambda1), (s1.xi_lower, s2.xi_lower), ok))
    return cases


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: dict = field(default_factory=dict)


def validation_report(
    solution: Solution, prior: Prior, params: MarketParams, utility: Utility,
    constraint: ConstraintSpec, n_paths: int = DEFAULT_PATHS, seed: int = 0,
    replication_paths: int = 2_000, replication_steps: Sequence[int] = (100, 200, 400),
    fsd_pairs: int = 5,
) -> dict:
    """Run all checks and collect a JSON-ready report.

    Budget and constraint estimates must lie within 3 standard errors;
    replication must converge under step-halving; FSD statics must hold.
    """
    checks: list[CheckResult] = []

    est, se = check_budget(solution, prior, params, utility, n_paths, seed)
    checks.append(CheckResult("budget", abs(est - params.x0) <= 3 * se + 1e-12,
                              {"estimate": est, "stderr": se, "target": params.x0}))

    beliefs = list(constraint.beliefs) or [prior]
    for i, b in enumerate(beliefs):
        est, se = check_constraint(solution, prior, b, params, utility, n_paths, seed + 1 + i)
        if solution.regime == "insurance":
            target, passed = 1.0, est == 1.0
        elif solution.regime == "constrained" and constraint.kind == "var":
            target = 1.0 - constraint.beta
            passed = abs(est - target) <= 3 * se
        else:
            # merton regime or multi-measure constraints: compare with the closed form
            target = solution.belief_probs[i] if solution.belief_probs else solution.prior_prob
            passed = abs(est - target) <= 3 * se + 1e-12
        checks.append(CheckResult(f"constraint[{i}]", passed,
                                  {"estimate": est, "stderr": se, "target": target,
                                   "belief": list(b.probs)}))

    if utility.kind == "power":
        ctx = StrategyContext.build(solution, prior, params, utility)
        rep = check_replication(ctx, replication_paths, replication_steps, seed)
        checks.append(CheckResult("replication", rep.decreasing,
                                  {**asdict(rep), "factors_in_0.4_0.7": rep.factors_within()}))

    if constraint.short_circuit is None:
        pairs = [(BeliefMeasure.of(prior), b) for b in constraint.beliefs if is_fsd_ordered(prior, b)]
        pairs += random_fsd_pairs(prior, fsd_pairs, seed)
        cases = check_fsd(prior, params, utility, solution.L, pairs, constraint.beta)
        checks.append(CheckResult("fsd", all(c.ok for c in cases),
                                  {"cases": [asdict(c) for c in cases]}))

    return {
        "schema_version": 1,
        "solution": solution.to_dict(),
        "checks": [asdict(c) for c in checks],
        "passed": all(c.passed for c in checks),
    }
