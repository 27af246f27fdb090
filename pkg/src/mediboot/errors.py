"""Exception types shared across the package."""


class MedibootError(Exception):
    """Base class for all mediboot errors."""


class InputError(MedibootError, ValueError):
    """Invalid user input (lengths, probabilities, malformed files)."""


class SampleTooSmallError(InputError):
    """Not enough observations to estimate the model."""


class DegenerateDesignError(MedibootError, ValueError):
    """Singular or near-singular regressor configuration."""


class NumericalError(MedibootError, RuntimeError):
    """Quadrature or root-finding failed to converge."""


class ResourceError(MedibootError, RuntimeError):
    """A configured memory or retry budget was exceeded."""
