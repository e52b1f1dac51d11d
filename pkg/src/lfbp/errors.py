"""Package-level exception types."""


class NumericalError(RuntimeError):
    """A numerical procedure failed: divergence, singular solve, or an
    unmet residual bound."""
