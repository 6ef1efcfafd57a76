"""Bayesian belief over a discrete market price of risk.

The investor observes ``Y(t) = W(t) + theta * t`` and holds a discrete prior
on ``theta``.  Everything here is a closed-form function of ``(t, y)``:

    L_t(v, y) = exp(v * y - v**2 * t / 2)
    F(t, y)   = sum_k p_k L_t(v_k, y)
    P(theta = v_k | Y(t) = y) = p_k L_t(v_k, y) / F(t, y)
    theta_hat(t, y) = F_y(t, y) / F(t, y)

Likelihoods are handled in log space with a max shift so that long horizons
do not overflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import optimize
from scipy.special import logsumexp

from .errors import CapabilityError, DomainError, RangeError

PROB_SUM_TOL = 1e-12


@dataclass(frozen=True)
class Prior:
    """Discrete distribution of the market price of risk.

    Values are sorted on construction; ``probs`` follows the same order.
    """

    values: tuple[float, ...]
    probs: tuple[float, ...]

    def __init__(self, values: Sequence[float], probs: Sequence[float]):
        vals = np.asarray(values, dtype=float).ravel()
        ps = np.asarray(probs, dtype=float).ravel()
        if vals.size == 0 or vals.size != ps.size:
            raise DomainError("prior values and probs must be non-empty and of equal length")
        if not (np.all(np.isfinite(vals)) and np.all(np.isfinite(ps))):
            raise DomainError("prior entries must be finite")
        if np.any(ps <= 0):
            raise DomainError("every prior probability must be > 0")
        if abs(ps.sum() - 1.0) > PROB_SUM_TOL:
            raise DomainError(f"prior probabilities sum to {ps.sum()!r}, not 1")
        order = np.argsort(vals, kind="stable")
        vals, ps = vals[order], ps[order]
        if np.any(np.diff(vals) <= 0):
            raise DomainError("duplicate prior support values")
        object.__setattr__(self, "values", tuple(float(v) for v in vals))
        object.__setattr__(self, "probs", tuple(float(p) for p in ps))

    @classmethod
    def point(cls, value: float) -> Prior:
        return cls([value], [1.0])

    @property
    def theta(self) -> NDArray[np.float64]:
        return np.asarray(self.values)

    @property
    def p(self) -> NDArray[np.float64]:
        return np.asarray(self.probs)

    @property
    def all_nonneg(self) -> bool:
        return self.values[0] >= 0.0

    @property
    def monotone(self) -> bool:
        """True when ``y -> F(t, y)`` is strictly increasing."""
        return self.all_nonneg and self.values[-1] > 0.0

    @property
    def mean(self) -> float:
        return float(self.p @ self.theta)

    def require_monotone(self) -> None:
        if not self.monotone:
            raise CapabilityError(
                "operation needs non-negative prior values with at least one > 0; "
                f"got {self.values}"
            )


def _check_t(t: float) -> None:
    if not t >= 0:
        raise DomainError(f"time must be >= 0, got {t}")


def likelihood(value: float, t: float, y: ArrayLike) -> NDArray[np.float64] | float:
    """Likelihood ratio ``exp(value * y - value**2 * t / 2)``."""
    _check_t(t)
    out = np.exp(value * np.asarray(y, dtype=float) - 0.5 * value * value * t)
    return out if out.ndim else float(out)


def _log_terms(prior: Prior, t: float, y: ArrayLike) -> NDArray[np.float64]:
    # shape (..., m): log p_k + log L_t(v_k, y)
    y = np.asarray(y, dtype=float)
    th = prior.theta
    return np.log(prior.p) + y[..., None] * th - 0.5 * th * th * t


def log_mixture_F(prior: Prior, t: float, y: ArrayLike) -> NDArray[np.float64] | float:
    _check_t(t)
    out = logsumexp(_log_terms(prior, t, y), axis=-1)
    return out if np.ndim(out) else float(out)


def mixture_F(prior: Prior, t: float, y: ArrayLike) -> NDArray[np.float64] | float:
    out = np.exp(log_mixture_F(prior, t, y))
    return out if np.ndim(out) else float(out)


def mixture_Fy(prior: Prior, t: float, y: ArrayLike) -> NDArray[np.float64] | float:
    """Analytic derivative ``dF/dy = sum_k v_k p_k L_t(v_k, y)``."""
    _check_t(t)
    lt = _log_terms(prior, t, y)
    out = np.sum(prior.theta * np.exp(lt), axis=-1)
    return out if np.ndim(out) else float(out)


def posterior(prior: Prior, t: float, y: ArrayLike) -> NDArray[np.float64]:
    """Posterior weights over ``prior.values``; last axis indexes the support."""
    _check_t(t)
    lt = _log_terms(prior, t, y)
    lt = lt - lt.max(axis=-1, keepdims=True)
    w = np.exp(lt)
    return w / w.sum(axis=-1, keepdims=True)


def theta_hat(prior: Prior, t: float, y: ArrayLike) -> NDArray[np.float64] | float:
    out = posterior(prior, t, y) @ prior.theta
    return out if np.ndim(out) else float(out)


def inf_F(prior: Prior) -> float:
    """Infimum of ``y -> F(t, y)`` for a monotone prior (not attained)."""
    return prior.probs[0] if prior.values[0] == 0.0 else 0.0


def inverse_F(prior: Prior, t: float, v: float) -> float:
    """Solve ``F(t, y) = v`` for ``y``.

    Brent's method on ``log F``, bracketed by geometric expansion around the
    single-point solution at the prior mean.  The result satisfies
    ``|F(t, y) - v| <= 1e-12 * v``.
    """
    _check_t(t)
    prior.require_monotone()
    if not (v > inf_F(prior)) or not math.isfinite(v):
        raise RangeError(f"F(t, .) never equals {v}; attainable range is ({inf_F(prior)}, inf)")
    target = math.log(v)
    th = prior.theta
    if th.size == 1:
        return (target + 0.5 * th[0] ** 2 * t) / th[0]

    def f(y: float) -> float:
        return float(logsumexp(np.log(prior.p) + y * th - 0.5 * th * th * t)) - target

    mean = prior.mean
    y0 = (target + 0.5 * mean * mean * t) / mean
    width = 1.0
    lo, hi = y0 - width, y0 + width
    for _ in range(200):
        if f(lo) < 0.0 < f(hi):
            break
        width *= 2.0
        if f(lo) >= 0.0:
            lo = y0 - width
        if f(hi) <= 0.0:
            hi = y0 + width
    else:
        raise RangeError(f"could not bracket F(t, y) = {v}")
    return float(optimize.brentq(f, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500))
