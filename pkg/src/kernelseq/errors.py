"""Exception types raised across the package."""


class KernelSeqError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(KernelSeqError, ValueError):
    """An argument violates a documented precondition."""


class DegenerateInputError(KernelSeqError, ValueError):
    """The input makes a quantity undefined (zero denominator, constant data)."""


class ConvergenceFailure(KernelSeqError, RuntimeError):
    """An iterative solver hit its iteration cap.

    The last iterate is attached so callers can keep going with it.
    """

    def __init__(self, message, weights=None, state=None):
        super().__init__(message)
        self.weights = weights
        self.state = state
