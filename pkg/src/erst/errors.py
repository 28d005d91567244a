"""Exception hierarchy shared by all solvers and tools."""


class ERSTError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(ERSTError, ValueError):
    """An argument lies outside the domain of the operation (e.g. alpha >= 1)."""


class DimensionError(ERSTError, ValueError):
    """Vector / matrix dimensions do not agree."""


class NotPositiveDefiniteError(ERSTError, ValueError):
    """A covariance matrix was expected to be positive definite."""


class DegenerateError(ERSTError, ValueError):
    """The problem is degenerate (flat objective, zero direction, collapsed series...)."""


class PoleError(ERSTError, ZeroDivisionError):
    """The secular function was evaluated at a pole with a nonzero coefficient."""


class AmbiguityError(ERSTError):
    """A result is not uniquely defined (e.g. repeated top eigenvalue)."""


class UnreachableTargetError(ERSTError):
    """The requested P&L target cannot be attained by any scenario.

    ``bound`` holds the attainable extreme (the infimum P&L for losses,
    the supremum for profits).
    """

    def __init__(self, message, bound):
        super().__init__(message)
        self.bound = bound


class SelfAuditError(ERSTError):
    """A reported result failed its in-process re-evaluation."""
