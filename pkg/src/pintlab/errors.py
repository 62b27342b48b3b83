"""Exception types shared across the package.

Errors that carry diagnostic payloads (an estimate, a pivot, a partial
trace) are distinct classes so callers can recover the payload instead of
parsing messages.
"""
from __future__ import annotations


class DimensionError(ValueError):
    """Operands have incompatible shapes or block counts."""


class InvalidWeightError(ValueError):
    """A weighted norm was given a nonpositive weight."""


class ConvergenceFailure(RuntimeError):
    """An iterative estimator ran out of iterations.

    ``estimate`` holds the best magnitude estimate at abort time.
    """

    def __init__(self, message: str, estimate: float):
        super().__init__(message)
        self.estimate = float(estimate)


class SingularMatrixError(RuntimeError):
    """LU factorization met a pivot below the singularity threshold."""

    def __init__(self, message: str, pivot: float):
        super().__init__(message)
        self.pivot = float(pivot)


class SingularSystemError(RuntimeError):
    """An implicit time step produced a singular linear system."""

    def __init__(self, message: str, dt: float, pivot: float):
        super().__init__(message)
        self.dt = float(dt)
        self.pivot = float(pivot)


class DegenerateProblemError(ValueError):
    """Problem construction asked for an empty or meaningless model."""


class HorizonExhausted(RuntimeError):
    """The event simulation hit max_events before any stop condition.

    ``trace`` holds everything simulated up to the abort point.
    """

    def __init__(self, message: str, trace):
        super().__init__(message)
        self.trace = trace


class InvalidThetaError(ValueError):
    """A contraction-factor majorant below the coarse operator norm."""


class EnvelopeUndefinedError(ValueError):
    """Error envelope requested for a non-contractive configuration."""


class UnfittableError(ValueError):
    """Overhead fit requested where the model coefficient vanishes."""


class UndefinedLimitError(ValueError):
    """Asymptotic ratio requested with a vanishing denominator."""


class ConfigError(ValueError):
    """Experiment configuration is malformed; message names the field."""
