"""Exception types shared across the package."""


class LqcError(Exception):
    """Base class for all lqcontrol errors."""


class ContractViolation(LqcError, ValueError):
    """An argument violates a documented precondition."""


class DimensionMismatch(ContractViolation):
    """Operands have inconsistent shapes."""


class UnstablePolicy(LqcError):
    """Closed-loop spectral radius is not strictly below one."""


class NumericalFailure(LqcError):
    """A numerical routine failed to produce a usable result."""


class NonConvergence(NumericalFailure):
    """An iterative solver hit its iteration cap.

    Carries the best iterate found so far (``best``) and the residual
    at that iterate (``residual``) when available.
    """

    def __init__(self, message, best=None, residual=None):
        super().__init__(message)
        self.best = best
        self.residual = residual


class InfeasibleSet(LqcError):
    """The constraint set is numerically empty."""


class SingularBlock(LqcError):
    """A matrix block that must be invertible is numerically singular."""


class RankDeficient(LqcError):
    """A matrix lacks the rank required by the operation."""


class Uncontrollable(LqcError):
    """The state cannot be driven to zero within the requested horizon."""


class ConfigError(LqcError, ValueError):
    """An experiment configuration is malformed."""
