"""
Sampling functions: seeded generators of perceptually equivalent variants.

- ``S1`` applies one augmentation, chosen uniformly from the set, with fresh parameters.
- ``S2`` applies every augmentation of the set in the fixed order
  affine, colour jitter, crop, blur, sharpness, autocontrast (p = 0.5).
- ``noise`` adds uniform noise in [-eps, eps] (the ranking-over-noisy-starts baseline).
"""

from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Optional, Sequence, Tuple, Union

import numpy as np

from src.augment.ops import (
    apply_affine,
    apply_autocontrast,
    apply_color_jitter,
    apply_crop_pad,
    apply_gaussian_blur,
    apply_sharpness,
)
from src.augment.presets import AUGMENTATION_KINDS, AugmentationPreset
from src.nn.tensor import ImageTensor
from src.utils.config import SAMPLING_IDS
from src.utils.exceptions import AugmentationError

SAMPLING_MODES = tuple(SAMPLING_IDS)

Seed = Union[int, np.random.SeedSequence]
Draw = Callable[[np.ndarray, AugmentationPreset, np.random.Generator], np.ndarray]


def _draw_affine(x: np.ndarray, p: AugmentationPreset, rng: np.random.Generator) -> np.ndarray:
    rotation = rng.uniform(-p.rotation_deg, p.rotation_deg)
    shift = rng.uniform(-p.shift_frac, p.shift_frac, size=2)
    return apply_affine(x, rotation, (shift[0], shift[1]), preset=p)


def _draw_jitter(x: np.ndarray, p: AugmentationPreset, rng: np.random.Generator) -> np.ndarray:
    b, c, s = rng.uniform(-1.0, 1.0, size=3) * np.array([p.brightness, p.contrast, p.saturation]) + 1.0
    hue = rng.uniform(-p.hue, p.hue)
    return apply_color_jitter(x, b, c, s, hue, preset=p)


def _draw_crop(x: np.ndarray, p: AugmentationPreset, rng: np.random.Generator) -> np.ndarray:
    offset = rng.integers(0, 2 * p.pad + 1, size=2)
    return apply_crop_pad(x, p.pad, offset, preset=p)


def _draw_blur(x: np.ndarray, p: AugmentationPreset, rng: np.random.Generator) -> np.ndarray:
    return apply_gaussian_blur(x, p.blur_kernel, p.blur_sigma, preset=p)


def _draw_sharpness(x: np.ndarray, p: AugmentationPreset, rng: np.random.Generator) -> np.ndarray:
    return apply_sharpness(x, p.sharpness, preset=p)


def _draw_autocontrast(x: np.ndarray, p: AugmentationPreset, rng: np.random.Generator) -> np.ndarray:
    return apply_autocontrast(x)


DRAWS: Dict[str, Draw] = {
    "random-affine": _draw_affine,
    "color-jitter": _draw_jitter,
    "random-crop": _draw_crop,
    "gaussian-blur": _draw_blur,
    "sharpness": _draw_sharpness,
    "autocontrast": _draw_autocontrast,
}


@dataclass
class SamplingFunction:
    """
    A sampling mode with its augmentation set and its own random stream.

    The output sequence is a pure function of (seed, inputs, mode). ``stream(i)``
    derives an independent child function for candidate ``i``; child ``i`` is the
    same no matter how many children are taken, so exploration can be split
    across workers or truncated to a prefix without changing any candidate.

    Attributes:
        mode: "S1", "S2" or "noise".
        preset: Augmentation parameter bounds.
        augmentations: The augmentation set A (subset of AUGMENTATION_KINDS, kept in canonical order).
        epsilon: Noise half-width for "noise" mode.
        seed: Integer seed or SeedSequence of the stream.
    """
    mode: str
    preset: AugmentationPreset
    augmentations: Tuple[str, ...] = AUGMENTATION_KINDS
    epsilon: float = 0.0
    seed: Seed = 0
    rng: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if self.mode not in SAMPLING_MODES:
            raise AugmentationError(f"Unknown sampling mode '{self.mode}'. Valid modes: {', '.join(SAMPLING_MODES)}")
        unknown = [a for a in self.augmentations if a not in AUGMENTATION_KINDS]
        if unknown:
            raise AugmentationError(f"Unknown augmentations: {', '.join(unknown)}")
        self.augmentations = tuple(a for a in AUGMENTATION_KINDS if a in self.augmentations)
        if self.mode != "noise" and not self.augmentations:
            raise AugmentationError(f"Sampling mode {self.mode} needs a non-empty augmentation set")
        if self.epsilon < 0:
            raise AugmentationError(f"Noise epsilon must be >= 0, got {self.epsilon}")
        if not isinstance(self.seed, np.random.SeedSequence):
            self.seed = np.random.SeedSequence(int(self.seed))
        self.rng = np.random.default_rng(self.seed)

    @classmethod
    def noise(cls, epsilon: float, preset: AugmentationPreset, seed: Seed = 0) -> "SamplingFunction":
        return cls(mode="noise", preset=preset, epsilon=epsilon, seed=seed)

    @property
    def label(self) -> str:
        """Short name for reports, e.g. "S2", "S1:sharpness" or "noise"."""
        if self.mode == "S1" and len(self.augmentations) == 1:
            return f"S1:{self.augmentations[0]}"
        return self.mode

    def stream(self, index: int) -> "SamplingFunction":
        """Independent child function for candidate ``index``."""
        seq = self.seed
        child = np.random.SeedSequence(seq.entropy, spawn_key=tuple(seq.spawn_key) + (int(index),))
        return SamplingFunction(self.mode, self.preset, self.augmentations, self.epsilon, child)

    def with_seed(self, seed: Seed) -> "SamplingFunction":
        return SamplingFunction(self.mode, self.preset, self.augmentations, self.epsilon, seed)

    def sample(self, x: np.ndarray) -> ImageTensor:
        """Draw one variant of ``x``; advances the stream."""
        return sample(self, x)

    def describe(self) -> Dict[str, Any]:
        return {"mode": self.mode, "augmentations": list(self.augmentations), "epsilon": self.epsilon}


def sample(s: SamplingFunction, x: np.ndarray) -> ImageTensor:
    """
    Draw one perceptually equivalent variant of ``x`` from ``s``.

    Args:
        s: Sampling function (its stream advances).
        x: CHW image in [0, 1].

    Returns:
        A new float32 image of the same shape in [0, 1].
    """
    image = np.asarray(x, dtype=np.float32)
    if image.ndim != 3:
        raise AugmentationError(f"Sampling needs a CHW image, got shape {image.shape}")
    if s.mode == "noise":
        delta = s.rng.uniform(-s.epsilon, s.epsilon, size=image.shape).astype(np.float32)
        return np.clip(image + delta, 0.0, 1.0).astype(np.float32)
    if s.mode == "S1":
        kind = s.augmentations[int(s.rng.integers(len(s.augmentations)))]
        return np.array(DRAWS[kind](image, s.preset, s.rng), dtype=np.float32)
    out = image
    for kind in s.augmentations:
        # autocontrast is a coin flip inside the composition only
        if kind == "autocontrast" and s.rng.random() >= s.preset.autocontrast_p:
            continue
        out = DRAWS[kind](out, s.preset, s.rng)
    return np.array(out, dtype=np.float32)


def build_sampling(
    mode: str,
    preset: AugmentationPreset,
    epsilon: float = 0.0,
    augmentations: Optional[Sequence[str]] = None,
    seed: Seed = 0,
) -> SamplingFunction:
    """Convenience constructor; ``augmentations=None`` means the full set."""
    augs = AUGMENTATION_KINDS if augmentations is None else tuple(augmentations)
    return SamplingFunction(mode=mode, preset=preset, augmentations=augs, epsilon=epsilon, seed=seed)
