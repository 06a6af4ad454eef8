"""Exception types raised across the package."""


class InvalidInput(ValueError):
    """Input violates a documented precondition."""


class ShapeError(ValueError):
    """Array or tensor shapes are incompatible for the requested operation."""


class NonFiniteGradient(FloatingPointError):
    """A gradient contained NaN or inf during an optimizer step."""

    def __init__(self, names):
        self.names = list(names)
        super().__init__("non-finite gradient in: " + ", ".join(self.names))


class NotFittedError(ValueError, AttributeError):
    """Estimator used before ``fit``."""
