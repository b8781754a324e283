"""Exception types shared across the package."""


class ConfigError(ValueError):
    """A configuration value is invalid.  The message names the offending field."""


class UsageError(ValueError):
    """An API was called with arguments that violate its contract."""


class InsufficientOverdriveError(RuntimeError):
    """A code-density record never reached one or both rail codes."""


class TrainingDivergenceError(RuntimeError):
    """Training loss became non-finite.

    Parameters
    ----------
    epoch : int
        Index of the pass through the training set in which the
        divergence was detected.
    """

    def __init__(self, epoch: int, message: str | None = None):
        self.epoch = epoch
        super().__init__(message or f"training loss became non-finite in epoch {epoch}")


class QuantizationError(ValueError):
    """A tensor cannot be represented at the requested fixed-point precision."""
