"""Filtered Black-Scholes market: state-price density and path simulation.

In the observationally complete market the terminal state-price density is a
deterministic function of the observation ``Y_T``:

    xi(t) = exp(-r t) / F(t, Y(t))

Under the reference measure Q, ``Y`` is a standard Brownian motion; under P
(or any belief measure with the same Brownian motion) it is ``W + theta t``
with ``theta`` drawn once per path.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.special import ndtr

from .errors import DomainError
from .filter import Prior, inf_F, inverse_F, log_mixture_F

# Paths are generated in fixed-size blocks, each with its own spawned seed
# sequence, so results do not depend on how blocks are scheduled.
BLOCK_SIZE = 1 << 16


@dataclass(frozen=True)
class MarketParams:
    r: float = 0.03
    sigma: float = 0.2
    T: float = 10.0
    x0: float = 100.0

    def __post_init__(self):
        if not self.r >= 0:
            raise DomainError(f"r must be >= 0, got {self.r}")
        if not self.sigma > 0:
            raise DomainError(f"sigma must be > 0, got {self.sigma}")
        if not self.T > 0:
            raise DomainError(f"T must be > 0, got {self.T}")
        if not self.x0 > 0:
            raise DomainError(f"x0 must be > 0, got {self.x0}")

    @property
    def discount(self) -> float:
        return math.exp(-self.r * self.T)


class BeliefMeasure(Prior):
    """Alternative distribution of theta used to evaluate a VaR constraint.

    Same invariants as :class:`Prior`; it must live on the prior's support.
    """

    @property
    def weights(self) -> NDArray[np.float64]:
        return self.p

    def check_support(self, prior: Prior) -> None:
        if self.values != prior.values:
            raise DomainError(
                f"belief support {self.values} differs from prior support {prior.values}"
            )

    @classmethod
    def of(cls, prior: Prior) -> BeliefMeasure:
        return cls(prior.values, prior.probs)


def state_price(prior: Prior, params: MarketParams, t: float, y: ArrayLike):
    """State-price density ``exp(-r t) / F(t, y)``."""
    if not 0 <= t <= params.T:
        raise DomainError(f"t must lie in [0, T], got {t}")
    out = np.exp(-params.r * t - np.asarray(log_mixture_F(prior, t, y)))
    return out if np.ndim(out) else float(out)


def xi_cut(prior: Prior, params: MarketParams, x: float) -> float:
    """Observation level ``y`` with ``xi_T(y) = x``; -inf if ``xi_T`` never reaches ``x``."""
    v = 1.0 / (math.exp(params.r * params.T) * x)
    if v <= inf_F(prior):
        return -math.inf
    return inverse_F(prior, params.T, v)


def _tail_scalar(prior: Prior, belief: Prior, params: MarketParams, x: float) -> float:
    if not x > 0:
        raise DomainError(f"tail level must be > 0, got {x}")
    if math.isinf(x):
        return 0.0
    y_star = xi_cut(prior, params, x)
    if y_star == -math.inf:
        return 0.0
    sq = math.sqrt(params.T)
    return float(belief.p @ ndtr((y_star - belief.theta * params.T) / sq))


def xi_tail_prob(prior: Prior, belief: Prior, params: MarketParams, x: ArrayLike):
    """Probability that ``xi_T > x`` when theta is distributed as ``belief``.

    ``xi_T > x`` iff ``Y_T < y*(x)`` because ``F(T, .)`` is increasing, and
    under each component ``Y_T ~ N(v_k T, T)``.
    """
    prior.require_monotone()
    if isinstance(belief, BeliefMeasure):
        belief.check_support(prior)
    xs = np.asarray(x, dtype=float)
    out = np.array([_tail_scalar(prior, belief, params, float(v)) for v in xs.ravel()])
    out = out.reshape(xs.shape)
    return out if out.ndim else float(out)


def xi_tail_prob_mc(
    prior: Prior, belief: Prior, params: MarketParams, x: float, n_paths: int = 1_000_000, seed: int = 0
) -> tuple[float, float]:
    """Monte Carlo estimate of ``P(xi_T > x)``; works for any prior sign.

    Returns ``(estimate, binomial stderr)``.  Approximate by construction.
    """
    hits = 0
    for y_T, _ in _terminal_blocks(belief, params.T, n_paths, seed):
        hits += int(np.count_nonzero(state_price(prior, params, params.T, y_T) > x))
    est = hits / n_paths
    return est, math.sqrt(max(est * (1 - est), 0.0) / n_paths)


@dataclass
class PathBundle:
    """Simulated observation paths on a uniform mesh over ``[0, T]``.

    ``W`` and ``theta`` are only known for simulations under a belief measure;
    they are ``None`` for Q-simulations.
    """

    t: NDArray[np.float64]
    Y: NDArray[np.float64]
    xi: NDArray[np.float64]
    theta: NDArray[np.float64] | None = None
    W: NDArray[np.float64] | None = None
    X: NDArray[np.float64] | None = None
    seed: int = 0
    measure: str = "P"
    meta: dict = field(default_factory=dict)

    @property
    def n_paths(self) -> int:
        return self.Y.shape[0]

    @property
    def n_steps(self) -> int:
        return self.Y.shape[1] - 1

    def stock(self, params: MarketParams, s0: float = 1.0) -> NDArray[np.float64]:
        """Optional diagnostic: ``S = s0 exp((r - sigma^2/2) t + sigma Y)``."""
        return s0 * np.exp((params.r - 0.5 * params.sigma**2) * self.t + params.sigma * self.Y)

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["path", "theta", "Y_T", "xi_T", "X_T"])
            for i in range(self.n_paths):
                w.writerow([
                    i,
                    "" if self.theta is None else repr(float(self.theta[i])),
                    repr(float(self.Y[i, -1])),
                    repr(float(self.xi[i, -1])),
                    "" if self.X is None else repr(float(self.X[i, -1])),
                ])


def _block_rngs(seed: int, n_paths: int) -> Iterator[tuple[np.random.Generator, int]]:
    n_blocks = -(-n_paths // BLOCK_SIZE)
    children = np.random.SeedSequence(seed).spawn(n_blocks)
    for b, ss in enumerate(children):
        yield np.random.default_rng(ss), min(BLOCK_SIZE, n_paths - b * BLOCK_SIZE)


def _draw_theta(rng: np.random.Generator, belief: Prior | None, n: int) -> NDArray[np.float64] | None:
    if belief is None:
        return None
    idx = np.searchsorted(np.cumsum(belief.p)[:-1], rng.random(n), side="right")
    return belief.theta[idx]


def _terminal_blocks(belief: Prior | None, T: float, n_paths: int, seed: int):
    """Yield ``(Y_T, theta)`` block by block; ``belief=None`` means Q."""
    for rng, n in _block_rngs(seed, n_paths):
        theta = _draw_theta(rng, belief, n)
        y = math.sqrt(T) * rng.standard_normal(n)
        if theta is not None:
            y = y + theta * T
        yield y, theta


def simulate_terminal(
    belief: Prior | None, T: float, n_paths: int, seed: int
) -> tuple[NDArray[np.float64], NDArray[np.float64] | None]:
    """Exact draws of ``Y_T`` (and theta) without building a time grid."""
    ys, ths = [], []
    for y, th in _terminal_blocks(belief, T, n_paths, seed):
        ys.append(y)
        ths.append(th)
    return np.concatenate(ys), (None if belief is None else np.concatenate(ths))


def _simulate(
    prior: Prior, belief: Prior | None, params: MarketParams, n_paths: int, n_steps: int, seed: int
) -> PathBundle:
    if n_paths < 1 or n_steps < 1:
        raise DomainError("n_paths and n_steps must be >= 1")
    t = np.linspace(0.0, params.T, n_steps + 1)
    dt = params.T / n_steps
    Ws, Ys, ths = [], [], []
    for rng, n in _block_rngs(seed, n_paths):
        theta = _draw_theta(rng, belief, n)
        W = np.zeros((n, n_steps + 1))
        np.cumsum(math.sqrt(dt) * rng.standard_normal((n, n_steps)), axis=1, out=W[:, 1:])
        Ws.append(W)
        Ys.append(W if theta is None else W + theta[:, None] * t)
        ths.append(theta)
    Y = np.concatenate(Ys)
    log_F = np.column_stack([log_mixture_F(prior, ti, Y[:, i]) for i, ti in enumerate(t)])
    xi = np.exp(-params.r * t - log_F)
    xi[:, 0] = 1.0
    if belief is None:
        return PathBundle(t=t, Y=Y, xi=xi, seed=seed, measure="Q")
    return PathBundle(
        t=t, Y=Y, xi=xi, theta=np.concatenate(ths), W=np.concatenate(Ws), seed=seed, measure="P"
    )


def simulate_under_P(
    prior: Prior, params: MarketParams, n_paths: int, n_steps: int, seed: int = 0,
    belief: Prior | None = None,
) -> PathBundle:
    """Simulate with theta drawn from ``belief`` (default: the prior itself)."""
    return _simulate(prior, prior if belief is None else belief, params, n_paths, n_steps, seed)


def simulate_under_Q(
    prior: Prior, params: MarketParams, n_paths: int, n_steps: int, seed: int = 0
) -> PathBundle:
    return _simulate(prior, None, params, n_paths, n_steps, seed)


def belief_from(prior: Prior, weights: Sequence[float]) -> BeliefMeasure:
    """Belief with ``weights`` listed in the prior's (sorted) support order."""
    return BeliefMeasure(prior.values, weights)
