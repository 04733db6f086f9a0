"""Exception hierarchy shared by all gibbsline modules."""


class GibbslineError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(GibbslineError, ValueError):
    """An input violates a documented precondition or invariant."""


class DimensionCapError(ValidationError):
    """A dense object would exceed the configured Hilbert-space dimension cap."""


class NumericalError(GibbslineError, ArithmeticError):
    """A computation produced a result that cannot be used (e.g. nonpositive trace)."""
