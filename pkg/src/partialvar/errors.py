"""Exception hierarchy shared by all modules.

Each class carries the process exit code the CLI reports for it.
"""


class PartialVarError(Exception):
    exit_code = 1


class DomainError(PartialVarError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""

    exit_code = 2


class ConfigError(PartialVarError, ValueError):
    exit_code = 2


class CapabilityError(PartialVarError):
    """The operation needs a property the inputs lack (e.g. a monotone mixture)."""

    exit_code = 2


class InfeasibleError(PartialVarError):
    exit_code = 3


class NumericError(PartialVarError, ArithmeticError):
    """Root bracketing or range resolution failed."""

    exit_code = 4


class RangeError(NumericError):
    """Target value lies outside the attainable range of a monotone map."""
