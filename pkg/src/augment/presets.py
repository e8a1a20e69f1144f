"""
Augmentation parameter presets, keyed by dataset profile.
"""

from dataclasses import asdict, dataclass, replace
from typing import Any, Dict

from src.utils.config import AUGMENTATION_IDS
from src.utils.exceptions import AugmentationError

AUGMENTATION_KINDS = tuple(AUGMENTATION_IDS)


@dataclass(frozen=True)
class AugmentationPreset:
    """
    Parameter bounds for every augmentation in the set.

    Attributes:
        rotation_deg: Maximum absolute rotation.
        shift_frac: Maximum absolute translation per axis, as a fraction of the image side.
        brightness: Half-width of the brightness factor range around 1.
        contrast: Half-width of the contrast factor range around 1.
        saturation: Half-width of the saturation factor range around 1.
        hue: Maximum absolute hue shift, as a fraction of the hue circle.
        pad: Zero padding of the random crop.
        blur_kernel: Gaussian blur kernel size.
        blur_sigma: Gaussian blur sigma (also the largest sigma a direct call may use).
        sharpness: Sharpness factor.
        autocontrast_p: Probability that autocontrast fires inside an S2 composition.
    """
    rotation_deg: float
    pad: int
    blur_sigma: float
    sharpness: float
    shift_frac: float = 0.10
    brightness: float = 0.05
    contrast: float = 0.05
    saturation: float = 0.05
    hue: float = 0.05
    blur_kernel: int = 3
    autocontrast_p: float = 0.5

    def __post_init__(self) -> None:
        if self.blur_kernel < 1 or self.blur_kernel % 2 == 0:
            raise AugmentationError(f"blur_kernel must be a positive odd integer, got {self.blur_kernel}")
        if self.blur_sigma <= 0:
            raise AugmentationError(f"blur_sigma must be positive, got {self.blur_sigma}")
        if not 0.0 <= self.autocontrast_p <= 1.0:
            raise AugmentationError(f"autocontrast_p must be in [0, 1], got {self.autocontrast_p}")
        if self.pad < 0 or min(self.rotation_deg, self.shift_frac, self.brightness, self.contrast,
                               self.saturation, self.hue, self.sharpness) < 0:
            raise AugmentationError("Augmentation bounds must be non-negative")
        if self.brightness >= 1 or self.contrast >= 1 or self.saturation >= 1 or self.hue > 0.5:
            raise AugmentationError("Colour-jitter half-widths must be below 1 (hue at most 0.5)")

    def with_overrides(self, overrides: Dict[str, Any]) -> "AugmentationPreset":
        """
        Copy with some fields replaced (from the ``augmentation`` section of an experiment config).

        Raises:
            AugmentationError: On unknown field names or invalid values.
        """
        unknown = set(overrides) - set(asdict(self))
        if unknown:
            raise AugmentationError(f"Unknown augmentation preset fields: {', '.join(sorted(unknown))}")
        try:
            return replace(self, **overrides)
        except TypeError as e:
            raise AugmentationError(f"Invalid augmentation preset override: {overrides}") from e

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


HIGH_RES = AugmentationPreset(rotation_deg=2.0, pad=10, blur_sigma=1.0, sharpness=2.0)
LOW_RES = AugmentationPreset(rotation_deg=4.0, pad=3, blur_sigma=1.9, sharpness=1.5)

PRESETS: Dict[str, AugmentationPreset] = {"high-res": HIGH_RES, "low-res": LOW_RES}


def get_preset(preset_id: str) -> AugmentationPreset:
    """
    Raises:
        AugmentationError: If the preset id is unknown.
    """
    if preset_id not in PRESETS:
        raise AugmentationError(f"Unknown augmentation preset '{preset_id}'. Valid presets: {', '.join(PRESETS)}")
    return PRESETS[preset_id]


@dataclass(frozen=True)
class AugmentationSpec:
    """
    One member of the augmentation set together with its parameter bounds.

    Attributes:
        kind: Augmentation kind (see AUGMENTATION_KINDS).
        preset: Parameter bounds.
    """
    kind: str
    preset: AugmentationPreset

    def __post_init__(self) -> None:
        if self.kind not in AUGMENTATION_KINDS:
            raise AugmentationError(
                f"Unknown augmentation '{self.kind}'. Valid kinds: {', '.join(AUGMENTATION_KINDS)}"
            )
