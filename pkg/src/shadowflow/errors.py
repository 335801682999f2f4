"""Exception hierarchy shared by all modules."""


class ShadowFlowError(Exception):
    """Base class for every error raised by the package."""


class UsageError(ShadowFlowError, ValueError):
    """Bad arguments, inconsistent configuration or violated preconditions."""


class DomainError(ShadowFlowError, ValueError):
    """A point or state lies outside the region where a quantity is defined."""


class StiffnessError(ShadowFlowError, RuntimeError):
    """Step size underflow in the integrator.

    ``state`` carries the last accepted state so the caller can dump it.
    """

    def __init__(self, message, t=None, state=None):
        super().__init__(message)
        self.t = t
        self.state = state


class RhsError(ShadowFlowError, FloatingPointError):
    """The right-hand side produced a non-finite value."""


class PrecisionError(ShadowFlowError, RuntimeError):
    """A Monte-Carlo estimate did not reach the requested precision."""


class ConsistencyError(ShadowFlowError, AssertionError):
    """Two independent computations of the same quantity disagree."""
