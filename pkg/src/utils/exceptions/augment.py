"""Augmentation errors."""

from src.utils.exceptions.base import PeasError


class AugmentationError(PeasError):
    """Augmentation parameters fall outside the active preset, or the input is not an image."""
    pass
