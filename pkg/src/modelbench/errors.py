class DomainError(ValueError):
    """An argument is outside the domain an operation is defined on."""


class ModelError(ValueError):
    """A model is internally inconsistent (e.g. non-PSD covariance)."""


class SingularFilterError(ArithmeticError):
    def __init__(self, frequency: int, value: float):
        super().__init__(f"denominator vanishes at frequency {frequency} (|value| = {value:.3e})")
        self.frequency = frequency
        self.value = value


class EstimationFailure(RuntimeError):
    """No usable contour survived; the caller records a miss."""


class DegenerateGeometryError(ValueError):
    """Circle fit is rank deficient (e.g. collinear points)."""


class OptimalityViolation(AssertionError):
    """An estimator beat the Wiener bound by more than the Monte-Carlo slack."""
