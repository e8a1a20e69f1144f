"""Dataset and model-zoo exceptions."""

from typing import Optional, Sequence

from src.utils.exceptions.base import PeasError


class DatasetError(PeasError):
    """Base class for dataset loading/generation errors."""
    pass


class DatasetFormatError(DatasetError):
    """
    A dataset file could not be parsed.

    Args:
        message: Human-readable error message.
        offset: Byte offset at which parsing failed, if known.
        cause: Optional underlying exception.
    """
    def __init__(
        self, message: str, offset: Optional[int] = None, cause: Exception | None = None
    ) -> None:
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message, cause)
        self.offset = offset


class ZooError(PeasError):
    """Base class for model-zoo errors (unknown architectures, role assignment)."""
    pass


class CheckpointError(ZooError):
    """Checkpoint manifest or parameter blob is missing, truncated or of another version."""
    pass


class ZooTrainingError(ZooError):
    """
    One or more zoo models missed the held-out accuracy floor.

    Args:
        message: Human-readable error message.
        failed: Architecture ids of the models that failed.
    """
    def __init__(self, message: str, failed: Sequence[str] = ()) -> None:
        super().__init__(message)
        self.failed = list(failed)
