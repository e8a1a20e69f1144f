"""PEAS-lab exception hierarchy."""

from src.utils.exceptions.base import PeasError
from src.utils.exceptions.nn import ShapeError, NumericalError
from src.utils.exceptions.data import (
    DatasetError,
    DatasetFormatError,
    ZooError,
    CheckpointError,
    ZooTrainingError,
)
from src.utils.exceptions.augment import AugmentationError
from src.utils.exceptions.attacks import (
    AttackError,
    AttackConfigError,
    ExternalAttackError,
    BudgetViolationError,
)
from src.utils.exceptions.harness import ConfigError, PoolError, ReportError

__all__ = [
    "PeasError",
    "ShapeError",
    "NumericalError",
    "DatasetError",
    "DatasetFormatError",
    "ZooError",
    "CheckpointError",
    "ZooTrainingError",
    "AugmentationError",
    "AttackError",
    "AttackConfigError",
    "ExternalAttackError",
    "BudgetViolationError",
    "ConfigError",
    "PoolError",
    "ReportError",
]
