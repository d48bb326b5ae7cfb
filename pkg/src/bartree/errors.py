"""Exception hierarchy shared by the library and the command line."""


class BarError(Exception):
    """Base class for all errors raised by bartree."""


class DomainError(BarError, ValueError):
    """An argument lies outside the domain where the operation is defined."""


class ValidationError(BarError, ValueError):
    """A parameter set, noise law or document failed validation."""


class InstabilityError(DomainError):
    """The companion matrices do not satisfy the contraction condition."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class DegeneracyError(DomainError):
    """A limit matrix that must be positive definite is not."""


class ConsistencyError(BarError, RuntimeError):
    """Two independent computations of the same quantity disagree."""
