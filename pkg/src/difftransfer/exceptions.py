"""Exception types raised across the package."""


class DiffTransferError(Exception):
    """Base class for all package errors."""


class DecodeError(DiffTransferError):
    """Audio file could not be read or decoded."""


class EmptyInputError(DiffTransferError, ValueError):
    """Input audio or spectrogram has no samples."""


class ShapeError(DiffTransferError, ValueError):
    """Array shapes do not match what an operation expects."""


class DomainError(DiffTransferError, ValueError):
    """A scalar argument lies outside its valid range."""


class ConfigError(DiffTransferError, ValueError):
    """Invalid configuration value or key."""


class DatasetError(DiffTransferError):
    """Paired corpus is malformed (e.g. a track missing its counterpart)."""


class CheckpointError(DiffTransferError):
    """Checkpoint directory is missing files or manifest fields."""


class InsufficientDataError(DiffTransferError, ValueError):
    """Too few samples to estimate a statistic."""


class TrainingDivergedError(DiffTransferError, RuntimeError):
    """Training produced a non-finite loss."""


class DegenerateStatsWarning(UserWarning):
    """Normalization statistics have zero range."""
