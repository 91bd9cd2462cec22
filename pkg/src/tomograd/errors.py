"""Exception types raised across the package."""


class TomographyError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(TomographyError, ValueError):
    pass


class DegenerateAnsatzError(TomographyError):
    """Parameters collapse to a zero matrix or a zero state row."""


class ConstraintViolationError(TomographyError):
    """Parameters have drifted off their constraint set."""


class InformationallyIncompleteError(TomographyError):
    """The measurement set does not determine the state.

    ``rank`` holds the numerical rank of the restricted sensing matrix.
    """

    def __init__(self, message, rank=None):
        super().__init__(message)
        self.rank = rank


class ZeroGradient(TomographyError):
    """Raised when a retraction is asked to follow a vanishing gradient.

    Callers treat this as convergence rather than failure.
    """
