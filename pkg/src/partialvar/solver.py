"""Calibration of the VaR-constrained optimal terminal wealth.

The optimal terminal wealth is a decreasing function of the terminal
state-price density with a flat piece at the threshold ``L``::

    X*(xi) = I(lam * xi)   if xi < xi_lower
             L             if xi_lower <= xi < xi_upper
             I(lam * xi)   if xi >= xi_upper

with ``xi_lower = U'(L) / lam``, ``xi_upper`` the ``beta``-quantile of
``xi_T`` under the constraint measure(s), and ``lam`` fixed by the budget
``E_P[xi_T X*] = x0``.  ``xi_upper`` is resolved first, then ``lam``.

Every P-expectation of a xi-weighted payoff is computed as
``exp(-r T) E_Q[X]`` with ``Y_T ~ N(0, T)`` under Q.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from typing import Callable, Literal, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import optimize
from scipy.special import ndtr

from .errors import DomainError, InfeasibleError, NumericError
from .filter import Prior, log_mixture_F
from .market import BeliefMeasure, MarketParams, xi_cut, xi_tail_prob
from .utility import Utility

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
QUAD_NODES = 2000
Z_WINDOW = 8.0
XI_RTOL = 1e-10
LAMBDA_RTOL = 1e-12

Regime = Literal["merton", "constrained", "insurance"]


@lru_cache(maxsize=8)
def gauss_legendre(n: int) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    return np.polynomial.legendre.leggauss(n)


def integrate_pieces(
    f: Callable[[NDArray[np.float64]], NDArray[np.float64]],
    pieces: Sequence[tuple[float, float]],
    n: int = QUAD_NODES,
) -> float:
    """Gauss-Legendre sum over ``[a, b]`` pieces (empty pieces are skipped)."""
    x, w = gauss_legendre(n)
    total = 0.0
    for a, b in pieces:
        if not b > a:
            continue
        half = 0.5 * (b - a)
        total += half * float(w @ f(half * x + 0.5 * (a + b)))
    return total


@dataclass(frozen=True)
class ConstraintSpec:
    """Which measure(s) and level ``beta`` define the VaR-type constraint.

    kinds: ``unconstrained`` (beta = 1), ``insurance`` (beta = 0), ``var``
    (one belief), ``robust_min`` (worst case over beliefs) and ``weighted``
    (``sum_i alpha_i P_i(X >= L) >= 1 - beta``).
    """

    kind: Literal["unconstrained", "insurance", "var", "robust_min", "weighted"]
    beta: float
    beliefs: tuple[BeliefMeasure, ...] = ()
    alphas: tuple[float, ...] = ()

    def __post_init__(self):
        if not 0.0 <= self.beta <= 1.0:
            raise DomainError(f"beta must lie in [0, 1], got {self.beta}")
        object.__setattr__(self, "beliefs", tuple(self.beliefs))
        object.__setattr__(self, "alphas", tuple(float(a) for a in self.alphas))
        if self.kind == "unconstrained" and self.beta != 1.0:
            raise DomainError("unconstrained means beta = 1")
        if self.kind == "insurance" and self.beta != 0.0:
            raise DomainError("insurance means beta = 0")
        if self.kind == "var" and len(self.beliefs) != 1:
            raise DomainError("var constraint takes exactly one belief")
        if self.kind == "robust_min" and not self.beliefs:
            raise DomainError("robust_min needs at least one belief")
        if self.kind == "weighted":
            if len(self.alphas) != len(self.beliefs) or not self.beliefs:
                raise DomainError("weighted needs one alpha per belief")
            a = np.asarray(self.alphas)
            # alpha_i = 0 is allowed so a weighted constraint can reduce to a single measure
            if np.any(a < 0) or not np.any(a > 0):
                raise DomainError("weights alpha must be >= 0 with at least one > 0")
            if abs(a.sum() - 1.0) > 1e-12:
                log.warning("weighted constraint: alphas sum to %g, equation used as stated", a.sum())
        if self.kind not in ("unconstrained", "insurance", "var", "robust_min", "weighted"):
            raise DomainError(f"unknown constraint kind {self.kind!r}")

    @classmethod
    def unconstrained(cls) -> ConstraintSpec:
        return cls("unconstrained", 1.0)

    @classmethod
    def insurance(cls) -> ConstraintSpec:
        return cls("insurance", 0.0)

    @classmethod
    def var(cls, belief: BeliefMeasure, beta: float) -> ConstraintSpec:
        return cls("var", beta, (belief,))

    @classmethod
    def robust_min(cls, beliefs: Sequence[BeliefMeasure], beta: float) -> ConstraintSpec:
        return cls("robust_min", beta, tuple(beliefs))

    @classmethod
    def weighted(cls, alphas: Sequence[float], beliefs: Sequence[BeliefMeasure], beta: float) -> ConstraintSpec:
        return cls("weighted", beta, tuple(beliefs), tuple(alphas))

    @property
    def short_circuit(self) -> Regime | None:
        if self.kind == "unconstrained" or self.beta == 1.0:
            return "merton"
        if self.kind == "insurance" or self.beta == 0.0:
            return "insurance"
        return None

    def aggregate_tail(self, prior: Prior, params: MarketParams, x: float) -> float:
        """Constraint-side probability that ``xi_T > x``."""
        tails = [xi_tail_prob(prior, b, params, x) for b in self.beliefs]
        if self.kind == "weighted":
            return float(np.dot(self.alphas, tails))
        return float(max(tails))

    def aggregate_prob(self, probs: Sequence[float]) -> float:
        """Combine per-belief ``P_i(X >= L)`` as the constraint does."""
        if self.kind == "weighted":
            return float(np.dot(self.alphas, probs))
        return float(min(probs))


@dataclass
class Solution:
    lambda1: float
    xi_lower: float
    xi_upper: float | None
    regime: Regime
    L: float
    budget_residual: float = math.nan
    constraint_prob: float = math.nan
    belief_probs: list[float] = field(default_factory=list)
    prior_prob: float = math.nan

    @property
    def flat_region(self) -> tuple[float, float]:
        """``[lo, hi)`` in xi where terminal wealth equals ``L`` (empty in merton regime)."""
        if self.regime == "merton":
            return (self.xi_lower, self.xi_lower)
        if self.regime == "insurance":
            return (self.xi_lower, math.inf)
        return (self.xi_lower, max(self.xi_lower, self.xi_upper))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["schema_version"] = SCHEMA_VERSION
        for k, v in d.items():
            if isinstance(v, float) and not math.isfinite(v):
                d[k] = None
        return d

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def _cut_points(prior: Prior, params: MarketParams, lo: float, hi: float) -> tuple[float, float]:
    """Y-space images ``(y_hi_xi, y_lo_xi)`` of the flat region ``[lo, hi)``.

    ``xi`` decreases in ``y``, so ``xi in [lo, hi)`` iff ``y in (y(hi), y(lo)]``.
    """
    if not hi > lo:
        return (0.0, 0.0)
    y_hi = -math.inf if math.isinf(hi) else xi_cut(prior, params, hi)
    y_lo = xi_cut(prior, params, lo)
    return (y_hi, y_lo)


def log_unconstrained_wealth(prior: Prior, params: MarketParams, utility: Utility, lambda1: float, y: ArrayLike):
    """``log I(lambda1 xi_T(y))`` computed without forming ``xi``."""
    log_xi = -params.r * params.T - np.asarray(log_mixture_F(prior, params.T, y))
    return -utility.inv_gamma * (math.log(lambda1) + log_xi)


def wealth_in_y(
    prior: Prior, params: MarketParams, utility: Utility, L: float,
    lambda1: float, flat: tuple[float, float], y: ArrayLike,
):
    """Terminal wealth as a function of ``Y_T`` for a given flat xi-region."""
    y = np.asarray(y, dtype=float)
    out = np.exp(log_unconstrained_wealth(prior, params, utility, lambda1, y))
    yb, ya = _cut_points(prior, params, *flat)
    if ya > yb:
        out = np.where((y > yb) & (y <= ya), L, out)
    return out


def _z_window(prior: Prior, params: MarketParams, utility: Utility) -> tuple[float, float]:
    # the I-branch grows like exp(v_max sqrt(T) z / gamma); shift the upper edge with it
    shift = max(prior.values[-1], 0.0) * math.sqrt(params.T) * utility.inv_gamma
    return (-Z_WINDOW, Z_WINDOW + shift)


def q_expectation(
    prior: Prior, params: MarketParams, utility: Utility, g: Callable, cuts: Sequence[float] = ()
) -> float:
    """``E_Q[g(Y_T)]`` by Gauss-Legendre in ``z = Y_T / sqrt(T)``, split at ``cuts`` (y-space)."""
    sq = math.sqrt(params.T)
    zl, zu = _z_window(prior, params, utility)
    pts = sorted(min(max(c / sq, zl), zu) for c in cuts if math.isfinite(c))
    edges = [zl, *pts, zu]
    phi = lambda z: np.exp(-0.5 * z * z) / math.sqrt(2 * math.pi)
    return integrate_pieces(lambda z: g(sq * z) * phi(z), list(zip(edges[:-1], edges[1:])))


def budget(
    prior: Prior, params: MarketParams, utility: Utility, L: float,
    xi_lower: float, xi_upper: float, lambda1: float,
) -> float:
    """``E_P[xi_T X*]`` for the terminal map with flat region ``[xi_lower, xi_upper)``.

    ``xi_upper = inf`` gives the insurance map, ``xi_upper <= xi_lower`` the
    unconstrained one.
    """
    if not lambda1 > 0:
        raise DomainError(f"lambda1 must be > 0, got {lambda1}")
    sq = math.sqrt(params.T)
    zl, zu = _z_window(prior, params, utility)
    yb, ya = _cut_points(prior, params, xi_lower, xi_upper)
    phi = lambda z: np.exp(-0.5 * z * z) / math.sqrt(2 * math.pi)
    free = lambda z: np.exp(log_unconstrained_wealth(prior, params, utility, lambda1, sq * z)) * phi(z)
    if ya > yb:
        zb, za = yb / sq, ya / sq
        pieces = [(zl, min(zb, zu)), (max(za, zl), zu)]
        flat = L * max(float(ndtr(za) - ndtr(zb)), 0.0)
    else:
        pieces, flat = [(zl, zu)], 0.0
    return params.discount * (integrate_pieces(free, pieces) + flat)


def feasibility_check(prior: Prior, params: MarketParams, L: float, xi_upper: float) -> bool:
    """Whether ``x0 >= E_P[xi_T L 1{xi_T <= xi_upper}] = L exp(-rT) Q(xi_T <= xi_upper)``."""
    if not xi_upper > 0:
        raise DomainError("xi_upper must be > 0")
    if math.isinf(xi_upper):
        q = 1.0
    else:
        q = float(ndtr(-xi_cut(prior, params, xi_upper) / math.sqrt(params.T)))
    return params.x0 >= L * params.discount * q


def _root_in_log(f: Callable[[float], float], start: float, rtol: float, what: str) -> float:
    """Root of a decreasing ``f`` on ``(0, inf)``, bracketed geometrically around ``start``."""
    s0 = math.log(start)
    g = lambda s: f(math.exp(s))
    lo = hi = s0
    glo = ghi = g(s0)
    step = 0.5
    for _ in range(200):
        if glo > 0 > ghi:
            break
        if glo <= 0:
            lo -= step
            glo = g(lo)
        if ghi >= 0:
            hi += step
            ghi = g(hi)
        step *= 2
        if step > 1e3:
            break
    if not (glo > 0 > ghi):
        if glo == 0 or ghi == 0:
            return math.exp(lo if glo == 0 else hi)
        raise NumericError(f"{what}: no root in bracket [{math.exp(lo):g}, {math.exp(hi):g}] "
                           f"(f = {glo:g}, {ghi:g})")
    s = optimize.brentq(g, lo, hi, xtol=rtol, rtol=4 * np.finfo(float).eps, maxiter=500)
    return math.exp(s)


def _single_root(prior: Prior, params: MarketParams, tail: Callable[[float], float], beta: float) -> float:
    # tail decreases from sup (x -> 0) to 0 (x -> inf)
    return _root_in_log(lambda x: tail(x) - beta, 1.0, XI_RTOL * 1e-2, "xi_upper")


def solve_xi_upper(prior: Prior, params: MarketParams, constraint: ConstraintSpec) -> float:
    """The ``beta``-quantile level of ``xi_T`` under the constraint measure(s)."""
    if constraint.short_circuit is not None:
        raise DomainError(f"beta = {constraint.beta} has no xi_upper (regime {constraint.short_circuit})")
    prior.require_monotone()
    for b in constraint.beliefs:
        b.check_support(prior)
    beta = constraint.beta
    if constraint.kind == "robust_min":
        roots = [_single_root(prior, params, lambda x, b=b: xi_tail_prob(prior, b, params, x), beta)
                 for b in constraint.beliefs]
        return max(roots)
    if constraint.kind == "weighted" and not beta < sum(constraint.alphas):
        raise NumericError(f"weighted tail never reaches beta = {beta}: sup is {sum(constraint.alphas)}")
    return _single_root(prior, params, lambda x: constraint.aggregate_tail(prior, params, x), beta)


def merton_lambda(prior: Prior, params: MarketParams, utility: Utility) -> float:
    """Multiplier of the unconstrained problem: ``budget(lam) = lam**(-1/gamma) budget(1)``."""
    k = budget(prior, params, utility, 1.0, 1.0, 0.0, 1.0)
    return (k / params.x0) ** utility.gamma


def solve_lambda1(
    prior: Prior, params: MarketParams, utility: Utility, L: float, xi_upper: float
) -> tuple[float, float]:
    """Budget multiplier and the induced ``xi_lower = U'(L) / lambda1``.

    ``xi_lower`` moves with ``lambda1`` inside every iterate.
    """
    if not feasibility_check(prior, params, L, xi_upper):
        raise InfeasibleError(
            f"x0 = {params.x0} cannot fund L = {L} on {{xi_T <= {xi_upper}}}"
        )
    uL = float(utility.U_prime(L))
    f = lambda lam: budget(prior, params, utility, L, uL / lam, xi_upper, lam) - params.x0
    lam = _root_in_log(f, merton_lambda(prior, params, utility), LAMBDA_RTOL, "lambda1")
    return lam, uL / lam


def optimal_terminal_wealth(solution: Solution, utility: Utility, L: float, xi_T: ArrayLike):
    """Piecewise optimal terminal wealth as a function of ``xi_T``."""
    xi = np.asarray(xi_T, dtype=float)
    if np.any(~(xi > 0)):
        raise DomainError("xi_T must be > 0")
    out = utility.I(solution.lambda1 * xi)
    lo, hi = solution.flat_region
    out = np.where((xi >= lo) & (xi < hi), L, out)
    return out if out.ndim else float(out)


def terminal_wealth_y(solution: Solution, prior: Prior, params: MarketParams, utility: Utility, y: ArrayLike):
    """Same map expressed in ``Y_T``; exact on the cut points."""
    out = wealth_in_y(prior, params, utility, solution.L, solution.lambda1, solution.flat_region, y)
    return out if np.ndim(out) else float(out)


def prob_at_least_L(solution: Solution, prior: Prior, params: MarketParams, belief: Prior) -> float:
    """``P_belief(X* >= L)`` in closed form."""
    if solution.regime == "insurance":
        return 1.0
    # X* >= L exactly on {xi_T < xi_upper} (constrained) or {xi_T <= xi_lower} (merton)
    level = solution.xi_lower if solution.regime == "merton" else solution.xi_upper
    return 1.0 - xi_tail_prob(prior, belief, params, level)


def expected_utility(solution: Solution, prior: Prior, params: MarketParams, utility: Utility) -> float:
    """``E_P[U(X*)]`` using ``dP/dQ = F(T, Y_T)`` on the observation."""
    g = lambda y: utility.U(terminal_wealth_y(solution, prior, params, utility, y)) * mixture(y)
    mixture = lambda y: np.exp(log_mixture_F(prior, params.T, y))
    yb, ya = _cut_points(prior, params, *solution.flat_region)
    return q_expectation(prior, params, utility, g, cuts=(yb, ya))


def solve(
    prior: Prior, params: MarketParams, utility: Utility, constraint: ConstraintSpec, L: float
) -> Solution:
    """Calibrate the optimal terminal wealth for ``constraint`` and threshold ``L``."""
    if not L > 0:
        raise DomainError(f"L must be > 0, got {L}")
    for b in constraint.beliefs:
        b.check_support(prior)
    prior.require_monotone()
    uL = float(utility.U_prime(L))
    regime = constraint.short_circuit
    lam_m = merton_lambda(prior, params, utility)

    if regime == "merton":
        sol = Solution(lam_m, uL / lam_m, None, "merton", L)
    elif regime == "insurance":
        if not params.x0 >= L * params.discount:
            raise InfeasibleError(f"x0 = {params.x0} < L exp(-rT) = {L * params.discount}")
        lam, xl = solve_lambda1(prior, params, utility, L, math.inf)
        sol = Solution(lam, xl, math.inf, "insurance", L)
    else:
        xu = solve_xi_upper(prior, params, constraint)
        if constraint.aggregate_tail(prior, params, uL / lam_m) <= constraint.beta:
            # the unconstrained optimum already satisfies the constraint
            sol = Solution(lam_m, uL / lam_m, xu, "merton", L)
        else:
            lam, xl = solve_lambda1(prior, params, utility, L, xu)
            regime = "merton" if xl >= xu else "constrained"
            if regime == "merton":
                lam, xl = lam_m, uL / lam_m
            sol = Solution(lam, xl, xu, regime, L)

    lo, hi = sol.flat_region
    sol.budget_residual = budget(prior, params, utility, L, lo, hi, sol.lambda1) - params.x0
    eu = expected_utility(sol, prior, params, utility)
    if not math.isfinite(eu):
        raise NumericError("expected utility of the optimal wealth is not finite")
    sol.prior_prob = prob_at_least_L(sol, prior, params, prior)
    if constraint.beliefs:
        sol.belief_probs = [prob_at_least_L(sol, prior, params, b) for b in constraint.beliefs]
        sol.constraint_prob = constraint.aggregate_prob(sol.belief_probs)
    else:
        sol.constraint_prob = sol.prior_prob
    return sol
