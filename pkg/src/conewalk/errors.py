"""Exception hierarchy shared by every module."""


class ConewalkError(Exception):
    """Base class for all package errors."""


class InvalidInputError(ConewalkError, ValueError):
    """Malformed argument: wrong dimension, point outside the cone, unparseable name."""


class UnsupportedError(ConewalkError):
    """The requested combination of cone / distribution / method is not available."""


class WindowError(ConewalkError):
    """A lattice window is too small, or a dynamic program would not fit in memory."""


class ConvergenceError(ConewalkError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class AcceptanceUnderflowError(ConewalkError):
    """Rejection sampling acceptance fell below the configured floor."""


class ExtinctionError(ConewalkError):
    """Every particle died between two splitting levels."""


class ReachabilityError(ConewalkError):
    """The bridge end point cannot be reached from the start inside the cone."""
