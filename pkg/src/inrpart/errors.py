"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid configuration: bad shapes, unknown keys, out-of-range values."""


class InputError(ValueError):
    """Invalid runtime input (non-finite coordinates, bad image data, ...)."""


class UsageError(RuntimeError):
    """API misuse, e.g. replaying a tape that has already been consumed."""


class TrainingError(RuntimeError):
    """Numerical failure during optimization; carries the failing step index."""

    def __init__(self, message: str, step: int | None = None):
        super().__init__(message)
        self.step = step


class PartitionError(ValueError):
    """Partition construction failed (too few regions, invalid mask, ...)."""
