"""Optimal wealth process and trading strategy for power utility.

The discounted optimal wealth is ``h(t, Y_t)`` with

    h(t, y) = exp(-r T) E[X*_T(y + sqrt(T - t) Z)],   Z ~ N(0, 1),

split into the two free pieces (where ``X*_T = I(lam xi_T)``) and the flat
piece at ``L``.  The amount held in the stock is
``pi*_t = exp(r t) h_y(t, Y_t) / sigma``.

``h_y`` is differentiated under the integral sign.  The boundary terms at
the lower cut cancel (wealth is continuous there); the upward jump of the
payoff at the upper cut contributes ``(L - I(lam xi_upper)) phi(b) / sqrt(T - t)``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.special import ndtr

from ._kernels import free_integrals
from .errors import CapabilityError, DomainError
from .filter import Prior
from .market import MarketParams
from .solver import Solution, _cut_points, gauss_legendre, log_unconstrained_wealth
from .utility import Utility

Z_WINDOW = 8.0
STRATEGY_NODES = 64
# pi* is refused closer than this to the horizon; use the terminal map there
TERMINAL_GUARD = 1e-6

_SQRT_2PI = math.sqrt(2 * math.pi)


@dataclass(frozen=True)
class StrategyContext:
    solution: Solution
    prior: Prior
    params: MarketParams
    utility: Utility
    y_upper_cut: float  # image of xi_upper; -inf when there is no upper cut
    y_lower_cut: float  # image of xi_lower
    nodes: int = STRATEGY_NODES

    @classmethod
    def build(cls, solution: Solution, prior: Prior, params: MarketParams, utility: Utility,
              nodes: int = STRATEGY_NODES) -> StrategyContext:
        if utility.kind != "power":
            raise CapabilityError("the strategy representation is available for power utility only")
        if not prior.all_nonneg:
            raise CapabilityError("the strategy needs non-negative prior values")
        prior.require_monotone()
        yb, ya = _cut_points(prior, params, *solution.flat_region)
        if not ya > yb:
            yb = ya = math.nan
        return cls(solution, prior, params, utility, yb, ya, nodes)

    @property
    def has_flat(self) -> bool:
        return not math.isnan(self.y_lower_cut)

    @property
    def gamma(self) -> float:
        return self.utility.gamma

    @property
    def jump(self) -> float:
        """Upward payoff jump ``L - I(lam xi_upper)`` crossing the upper cut from below."""
        if not self.has_flat or self.y_upper_cut == -math.inf:
            return 0.0
        low_side = math.exp(log_unconstrained_wealth(
            self.prior, self.params, self.utility, self.solution.lambda1, self.y_upper_cut))
        return self.solution.L - low_side


def _check_t(ctx: StrategyContext, t: float) -> float:
    if not 0 <= t < ctx.params.T:
        raise DomainError(f"need 0 <= t < T, got t = {t}")
    return math.sqrt(ctx.params.T - t)


def _phi(z):
    return np.exp(-0.5 * z * z) / _SQRT_2PI


def _free_integrals(ctx: StrategyContext, y: NDArray[np.float64], sd: float):
    """Value and y-derivative integrals of the free payoff over the free z-pieces."""
    zl = -Z_WINDOW
    zu = Z_WINDOW + ctx.prior.values[-1] * sd / ctx.gamma
    x, w = gauss_legendre(ctx.nodes)
    log_scale = -(math.log(ctx.solution.lambda1) - ctx.params.r * ctx.params.T) / ctx.gamma
    has_flat = ctx.has_flat
    return free_integrals(
        np.ascontiguousarray(y, dtype=float), sd, zl, zu,
        ctx.y_upper_cut if has_flat else 0.0, ctx.y_lower_cut if has_flat else 0.0, has_flat,
        x, w, ctx.prior.theta, np.log(ctx.prior.p), ctx.params.T, log_scale, 1.0 / ctx.gamma,
    )


def _flat_parts(ctx: StrategyContext, y: NDArray[np.float64], sd: float):
    """``(flat probability, jump density)`` contributions in z-space."""
    if not ctx.has_flat:
        return np.zeros_like(y), np.zeros_like(y)
    a = (ctx.y_lower_cut - y) / sd
    b = (ctx.y_upper_cut - y) / sd
    return ndtr(a) - ndtr(b), _phi(b)


def h(ctx: StrategyContext, t: float, y: ArrayLike):
    """Discounted optimal wealth ``X*_t / B_t`` at observation ``Y_t = y``."""
    sd = _check_t(ctx, t)
    ys = np.atleast_1d(np.asarray(y, dtype=float))
    prob_flat, _ = _flat_parts(ctx, ys, sd)
    out = ctx.params.discount * (_free_integrals(ctx, ys, sd)[0] + ctx.solution.L * prob_flat)
    return out if np.ndim(y) else float(out[0])


def h_y(ctx: StrategyContext, t: float, y: ArrayLike):
    """Analytic ``dh/dy``."""
    sd = _check_t(ctx, t)
    ys = np.atleast_1d(np.asarray(y, dtype=float))
    _, dens = _flat_parts(ctx, ys, sd)
    out = ctx.params.discount * (_free_integrals(ctx, ys, sd)[1] + ctx.jump * dens / sd)
    return out if np.ndim(y) else float(out[0])


def wealth_process(ctx: StrategyContext, t: float, y: ArrayLike):
    return math.exp(ctx.params.r * t) * h(ctx, t, y)


def pi_star(ctx: StrategyContext, t: float, y: ArrayLike):
    """Amount invested in the stock, ``exp(r t) h_y(t, y) / sigma``."""
    if t >= ctx.params.T - TERMINAL_GUARD:
        raise DomainError(
            f"t = {t} is within {TERMINAL_GUARD} of the horizon; use the terminal wealth map"
        )
    return math.exp(ctx.params.r * t) * h_y(ctx, t, y) / ctx.params.sigma


def strategy_grid(ctx: StrategyContext, t_grid: Sequence[float], y_grid: Sequence[float]) -> list[tuple]:
    """Rows ``(t, y, X_t, pi_t)`` over the product grid."""
    ys = np.asarray(y_grid, dtype=float)
    rows = []
    for t in t_grid:
        X = wealth_process(ctx, float(t), ys)
        P = pi_star(ctx, float(t), ys)
        rows.extend((float(t), float(a), float(b), float(c)) for a, b, c in zip(ys, X, P))
    return rows


def write_strategy_csv(rows: Sequence[tuple], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "y", "X_t", "pi_t"])
        for row in rows:
            w.writerow([repr(v) for v in row])
