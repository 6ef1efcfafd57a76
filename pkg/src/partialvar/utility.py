"""Utility functions satisfying the Inada conditions.

Only two kinds are supported: CRRA power utility ``x**(1-g)/(1-g)`` and log
utility.  The set is closed on purpose; the strategy code dispatches on it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np
from numpy.typing import ArrayLike

from .errors import DomainError


@dataclass(frozen=True)
class Utility:
    kind: Literal["power", "log"] = "power"
    gamma: float = 3.0

    def __post_init__(self):
        if self.kind == "log":
            object.__setattr__(self, "gamma", 1.0)
        elif self.kind == "power":
            if not (self.gamma > 0 and self.gamma != 1):
                raise DomainError(f"power utility needs gamma > 0 and gamma != 1, got {self.gamma}")
        else:
            raise DomainError(f"unknown utility kind {self.kind!r}")

    @classmethod
    def power(cls, gamma: float) -> Utility:
        return cls("power", gamma)

    @classmethod
    def log(cls) -> Utility:
        return cls("log")

    @property
    def inv_gamma(self) -> float:
        """Exponent ``1/gamma`` in ``I(y) = y**(-1/gamma)`` (1 for log)."""
        return 1.0 / self.gamma

    def U(self, x: ArrayLike):
        x = _positive(x)
        if self.kind == "log":
            return np.log(x)
        return x ** (1.0 - self.gamma) / (1.0 - self.gamma)

    def U_prime(self, x: ArrayLike):
        x = _positive(x)
        return x ** (-self.gamma)

    def I(self, y: ArrayLike):
        """Inverse marginal utility."""
        y = _positive(y)
        return y ** (-self.inv_gamma)


def _positive(x: ArrayLike):
    arr = np.asarray(x, dtype=float)
    if np.any(~(arr > 0)):
        raise DomainError("utility is defined for strictly positive arguments only")
    return arr if arr.ndim else float(arr)
