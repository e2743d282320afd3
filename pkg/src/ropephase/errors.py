"""Exception hierarchy shared by all modules."""


class RopeError(Exception):
    """Base class for errors raised by :mod:`ropephase`."""


class InvalidInputError(RopeError, ValueError):
    """Input data violates a documented precondition."""


class InternalStateError(RopeError, RuntimeError):
    """The estimator reached a state its invariants forbid."""


class InsufficientWarmupError(InvalidInputError):
    """Warm-up recording too short to contain two pseudo-periods."""


class InsufficientDataError(InvalidInputError):
    """Not enough events (crossings, samples) to build the result."""


class InvalidFrameError(InvalidInputError):
    """Frame of reference with a non-orthonormal or singular basis."""


class DivergenceError(RopeError, ArithmeticError):
    """Numerical integration blew up."""

    def __init__(self, time):
        super().__init__(f"integration diverged at t = {time:.6g} s")
        self.time = time


class EmptyOverlapError(RopeError, ValueError):
    """Two phase sequences share no sample where both are defined."""


class ConfigurationError(RopeError, ValueError):
    """Inconsistent estimator or command configuration."""


class DegenerateWindowError(RopeError, ValueError):
    """Zero-variance data window where a principal direction is needed."""
