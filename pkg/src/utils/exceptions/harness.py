"""Experiment harness exceptions."""

from src.utils.exceptions.base import PeasError


class ConfigError(PeasError):
    """Experiment configuration is invalid."""
    pass


class PoolError(PeasError):
    """Not enough victim-correct samples to build an evaluation pool."""
    pass


class ReportError(PeasError):
    """A report could not be written or loaded."""
    pass
