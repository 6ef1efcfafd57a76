"""Expected-utility maximization under partial observation of the drift with
(robust) Value-at-Risk constraints."""

from .errors import (
    CapabilityError,
    ConfigError,
    DomainError,
    InfeasibleError,
    NumericError,
    PartialVarError,
    RangeError,
)
from .filter import Prior, inverse_F, likelihood, mixture_F, mixture_Fy, posterior, theta_hat
from .market import BeliefMeasure, MarketParams, belief_from, state_price, xi_tail_prob
from .solver import ConstraintSpec, Solution, budget, optimal_terminal_wealth, solve
from .strategy import StrategyContext, h, h_y, pi_star, wealth_process
from .utility import Utility

__all__ = [
    "BeliefMeasure", "CapabilityError", "ConfigError", "ConstraintSpec", "DomainError",
    "InfeasibleError", "MarketParams", "NumericError", "PartialVarError", "Prior", "RangeError",
    "Solution", "StrategyContext", "Utility", "belief_from", "budget", "h", "h_y", "inverse_F",
    "likelihood", "mixture_F", "mixture_Fy", "optimal_terminal_wealth", "pi_star", "posterior",
    "solve", "state_price", "theta_hat", "wealth_process", "xi_tail_prob",
]
