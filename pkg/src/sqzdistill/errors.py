"""Exception types shared across the package."""


class SqzError(Exception):
    """Base class for all package errors."""


class InvalidStateError(SqzError, ValueError):
    """Input is not a valid state or operator on the truncated Fock space."""


class TruncationError(SqzError):
    """Too much probability sits at the cutoff; increase the cutoff."""


class StateAnnihilatedError(SqzError):
    """An operation mapped the state to the zero vector."""


class ZeroProbabilityError(SqzError):
    """A conditional operation succeeded with probability zero."""


class DivergenceError(SqzError):
    """An iterative map or asymptotic formula has no physical limit."""


class EnvelopeError(SqzError):
    """Rejection-sampling envelope does not bound the target density."""


class SampleStarvationError(SqzError):
    """Too few samples survive to continue processing."""
