"""Exception types shared across the package."""


class NonFiniteFieldError(ValueError):
    """A field contains NaN or infinite entries."""


class BlowUpError(RuntimeError):
    """An integration produced NaN/Inf; `time` is the first offending time."""

    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time


class DegenerateConfigurationError(RuntimeError):
    """Landmarks collided or left the open interval; `time` is when."""

    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time


class MonotonicityError(RuntimeError):
    """A reconstructed flow stopped being strictly increasing in space."""


class ConstraintDriftError(RuntimeError):
    """Constraint residuals exceeded the allowed drift without repair enabled."""


class InfeasibleTargetError(ValueError):
    """Target measures violate the pointwise feasibility bound."""
