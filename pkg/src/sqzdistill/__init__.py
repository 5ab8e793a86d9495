"""Squeezing distillation: Fock-space Gaussification, 8-port sampling, tomography and temporal modes."""

from .errors import (
    DivergenceError,
    EnvelopeError,
    InvalidStateError,
    SampleStarvationError,
    SqzError,
    StateAnnihilatedError,
    TruncationError,
    ZeroProbabilityError,
)
from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "DivergenceError",
    "EnvelopeError",
    "InvalidStateError",
    "SampleStarvationError",
    "SqzError",
    "StateAnnihilatedError",
    "TruncationError",
    "ZeroProbabilityError",
    "__version__",
]
