"""Exception types raised across the package."""


class LVPIError(Exception):
    """Base class for all package errors."""


class ValidationError(LVPIError, ValueError):
    """Invalid input: bad shapes, out-of-range parameters, malformed files."""


class SingularityError(LVPIError, ArithmeticError):
    """A latent component carries (numerically) zero variance."""


class DegenerateComponentError(LVPIError, ArithmeticError):
    """Iterative extraction hit a zero-norm direction at ``component``."""

    def __init__(self, component: int, message: str = ""):
        self.component = component
        super().__init__(message or f"degenerate component at h={component}")


class NotCalibratedError(LVPIError):
    """Prediction intervals requested from a model without a calibration table."""
