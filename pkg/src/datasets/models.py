"""
Data models for datasets.
"""

from dataclasses import dataclass
from typing import Any, Dict, Optional, Tuple

from src.utils.config import PRESET_IDS
from src.utils.exceptions import DatasetError

HIGH_RES_MIN_SIDE = 64


@dataclass(frozen=True)
class DatasetProfile:
    """
    Shape and class count shared by every sample of a dataset.

    Attributes:
        name: Dataset name used in reports.
        shape: Image shape (C, H, W).
        num_classes: Number of classes K.
        preset: Augmentation preset id ("high-res" or "low-res").
    """
    name: str
    shape: Tuple[int, int, int]
    num_classes: int
    preset: str

    def __post_init__(self) -> None:
        if self.preset not in PRESET_IDS:
            raise DatasetError(f"Unknown preset '{self.preset}'. Valid presets: {', '.join(PRESET_IDS)}")
        if len(self.shape) != 3 or min(self.shape) < 1:
            raise DatasetError(f"Invalid image shape {self.shape}")
        if self.num_classes < 2:
            raise DatasetError(f"A dataset needs at least 2 classes, got {self.num_classes}")

    def to_dict(self) -> Dict[str, Any]:
        return {"name": self.name, "shape": list(self.shape), "num_classes": self.num_classes, "preset": self.preset}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "DatasetProfile":
        try:
            return cls(
                name=str(data["name"]),
                shape=tuple(int(d) for d in data["shape"]),
                num_classes=int(data["num_classes"]),
                preset=str(data["preset"]),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise DatasetError(f"Invalid dataset profile: {data}") from e


def default_preset(shape: Tuple[int, int, int]) -> str:
    """"high-res" for images at least 64 pixels on the short side, else "low-res"."""
    return "high-res" if min(shape[1], shape[2]) >= HIGH_RES_MIN_SIDE else "low-res"


@dataclass(frozen=True)
class SyntheticSpec:
    """
    Parameters of a generated pattern dataset.

    Attributes:
        classes: Number of classes K (2 to 10).
        shape: Image shape (C, H, W); H and W must be at least 8.
        per_class: Training samples per class.
        test_per_class: Held-out samples per class (defaults to per_class).
        noise: Standard deviation of the additive pixel noise.
        seed: Generation seed.
    """
    classes: int = 4
    shape: Tuple[int, int, int] = (3, 16, 16)
    per_class: int = 100
    test_per_class: Optional[int] = None
    noise: float = 0.05
    seed: int = 0

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "SyntheticSpec":
        fields = dict(data)
        if "shape" in fields:
            fields["shape"] = tuple(int(d) for d in fields["shape"])
        try:
            return cls(**fields)
        except TypeError as e:
            raise DatasetError(f"Invalid synthetic dataset spec: {data}") from e

    def profile(self, name: str = "synthetic", preset: Optional[str] = None) -> DatasetProfile:
        return DatasetProfile(name, tuple(self.shape), self.classes, preset or default_preset(self.shape))
