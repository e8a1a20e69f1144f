"""Tensor and network errors."""

from src.utils.exceptions.base import PeasError


class ShapeError(PeasError):
    """Input or layer shapes are incompatible."""
    pass


class NumericalError(PeasError):
    """Non-finite values, invalid labels or invalid numeric arguments."""
    pass
