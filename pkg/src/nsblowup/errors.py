"""Exception hierarchy shared across the package.

Split by how the command-line driver reports them: configuration problems,
numerical failures during integration or estimation, and malformed on-disk
artifacts.
"""

from __future__ import annotations

__all__ = [
    "ConfigError",
    "NumericError",
    "CorrectorDivergence",
    "NonFiniteState",
    "EstimationError",
    "CheckpointError",
]


class ConfigError(Exception):
    """Invalid configuration: bad keys, bad values, inconsistent mesh parameters."""


class NumericError(Exception):
    """A numerical procedure failed to produce a usable result."""


class CorrectorDivergence(NumericError):
    """Corrector iteration did not contract within the allowed iterations.

    Signals that the integration has reached its reliability horizon; the
    previously accepted state is the last trustworthy one.
    """

    def __init__(self, residual: float, iterations: int):
        self.residual = residual
        self.iterations = iterations
        super().__init__(
            f"corrector stalled: residual {residual:.3e} after {iterations} iterations"
        )


class NonFiniteState(NumericError):
    """NaN or Inf appeared in the evolving field."""


class EstimationError(NumericError):
    """A fit or estimator could not be computed from the supplied data."""


class CheckpointError(Exception):
    """Checkpoint file is malformed: bad magic, wrong length, or bad header."""
