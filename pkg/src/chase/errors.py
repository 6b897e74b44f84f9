"""Exception hierarchy shared by every CHASE component."""


class ChaseError(RuntimeError):
    """Base class for errors raised by the package."""


class InvalidShapeError(ChaseError, ValueError):
    """Raised when array dimensions do not line up."""


class InvalidInputError(ChaseError, ValueError):
    """Raised when an input is structurally unusable (too short, empty, ...)."""


class NumericalFailureError(ChaseError, ArithmeticError):
    """Raised when a loss or gradient stops being finite."""

    def __init__(self, message: str, *, diagnostic: str | None = None):
        self.diagnostic = diagnostic
        super().__init__(f"{message} ({diagnostic})" if diagnostic else message)


class ConfigError(ChaseError, ValueError):
    """Raised when configuration or data layout violates a precondition."""


class UndefinedMetricError(ChaseError):
    """Raised when a metric has no defined value (no acceptances, no abstentions)."""
