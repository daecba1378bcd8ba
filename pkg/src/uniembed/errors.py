"""Exception types shared across the package."""


class UniembedError(Exception):
    """Base class for all package errors."""


class InputError(UniembedError, ValueError):
    """Caller passed arguments that violate an operation's preconditions."""


class DegenerateInputError(InputError):
    """Input is numerically degenerate (zero rows, collapsed batches, ...)."""


class EmptyBatchError(InputError):
    """A batch contains no usable anchor-positive pair."""


class DegenerateBatchError(InputError):
    """Batch statistics (e.g. mean pairwise distance) are too small to use."""


class ConfigError(UniembedError):
    """A configuration file or object is inconsistent or incomplete."""


class DatasetParseError(UniembedError):
    """A dataset file is malformed. Carries the offending line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class TrainingError(UniembedError):
    """Training hit a numeric failure (non-finite loss or gradients)."""
