"""Exception types shared across the package."""


class SizeError(ValueError):
    """Raised when array dimensions are inconsistent with an operator."""


class SingularityError(ArithmeticError):
    """Raised when a spectral division would divide by zero."""


class NumericalError(ArithmeticError):
    """Raised when an iterative routine fails or produces non-finite values.

    Parameters
    ----------
    message : str
        Human readable description.
    step : str, optional
        Name of the algorithm step that failed.
    iterations : int, optional
        Iteration count reached before failure.
    last : object, optional
        Last iterate, kept for post-mortem inspection.
    """

    def __init__(self, message, step=None, iterations=None, last=None):
        super().__init__(message)
        self.step = step
        self.iterations = iterations
        self.last = last
