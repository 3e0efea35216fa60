"""Exception types shared across the package."""


class DronError(Exception):
    """Base class for all package errors."""


class ConfigurationError(DronError):
    """Invalid specs, shapes, or configuration values."""


class UsageError(DronError):
    """A function was called in a way its contract forbids."""


class TrainingError(DronError):
    """Optimization produced a non-finite quantity."""


class CheckpointError(DronError):
    """Checkpoint file could not be parsed or is unsupported."""
