"""
Generated geometric-pattern datasets.

Each class is a pattern (bars, disks, rings, crosses, checkers, ...) drawn
with random position, scale and colours plus Gaussian pixel noise. The
classes are easy for a small CNN to separate, which makes the generator a
stand-in for real benchmarks in tests and on machines without downloads.
"""

from typing import Callable, List, Tuple

import numpy as np

from src.datasets.models import SyntheticSpec
from src.nn.tensor import LabeledSample
from src.utils.exceptions import DatasetError
from src.utils.logger import get_logger

logger = get_logger(__name__)

MIN_SIDE = 8

Mask = Callable[[np.ndarray, np.ndarray], np.ndarray]


def _radius(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    return np.sqrt(u ** 2 + v ** 2)


PATTERNS: List[Tuple[str, Mask]] = [
    ("hbars", lambda u, v: np.cos(3.0 * np.pi * v) > 0.0),
    ("vbars", lambda u, v: np.cos(3.0 * np.pi * u) > 0.0),
    ("disk", lambda u, v: _radius(u, v) < 0.55),
    ("ring", lambda u, v: (_radius(u, v) > 0.4) & (_radius(u, v) < 0.7)),
    ("cross", lambda u, v: ((np.abs(u) < 0.18) | (np.abs(v) < 0.18)) & (np.maximum(np.abs(u), np.abs(v)) < 0.8)),
    ("checker", lambda u, v: np.cos(2.5 * np.pi * u) * np.cos(2.5 * np.pi * v) > 0.0),
    ("diagonal", lambda u, v: np.cos(2.5 * np.pi * (u + v)) > 0.0),
    ("square", lambda u, v: (np.maximum(np.abs(u), np.abs(v)) > 0.45) & (np.maximum(np.abs(u), np.abs(v)) < 0.7)),
    ("triangle", lambda u, v: (v > -0.6) & (v < 0.6) & (np.abs(u) < (v + 0.6) * 0.6)),
    ("x", lambda u, v: (np.abs(np.abs(u) - np.abs(v)) < 0.18) & (np.maximum(np.abs(u), np.abs(v)) < 0.8)),
]


def pattern_names() -> List[str]:
    return [name for name, _ in PATTERNS]


def _draw(label: int, shape: Tuple[int, int, int], noise: float, rng: np.random.Generator) -> np.ndarray:
    c, h, w = shape
    dy, dx = rng.uniform(-0.1, 0.1, size=2)
    scale = rng.uniform(0.85, 1.15)
    ys = (np.linspace(-1.0, 1.0, h) - dy) / scale
    xs = (np.linspace(-1.0, 1.0, w) - dx) / scale
    v, u = np.meshgrid(ys, xs, indexing="ij")
    mask = PATTERNS[label][1](u, v).astype(np.float32)
    foreground = rng.uniform(0.6, 1.0, size=c).astype(np.float32)
    background = rng.uniform(0.0, 0.3, size=c).astype(np.float32)
    image = background[:, None, None] + (foreground - background)[:, None, None] * mask[None]
    if noise > 0:
        image = image + rng.normal(0.0, noise, size=shape).astype(np.float32)
    return np.clip(image, 0.0, 1.0).astype(np.float32)


def _split(spec: SyntheticSpec, per_class: int, rng: np.random.Generator) -> List[LabeledSample]:
    # classes interleaved so any prefix of the split is balanced
    return [
        LabeledSample(image=_draw(i % spec.classes, spec.shape, spec.noise, rng), label=i % spec.classes, sample_id=i)
        for i in range(per_class * spec.classes)
    ]


def generate_synthetic_dataset(spec: SyntheticSpec) -> Tuple[List[LabeledSample], List[LabeledSample]]:
    """
    Generate a (train, test) pattern dataset, deterministic given ``spec.seed``.

    Args:
        spec: Class count, image shape, samples per class, noise and seed.

    Returns:
        (train, test) with ``per_class * classes`` and ``test_per_class * classes`` samples.

    Raises:
        DatasetError: If K is outside [2, 10], per_class < 2, or H or W < 8.
    """
    c, h, w = spec.shape
    if h < MIN_SIDE or w < MIN_SIDE:
        raise DatasetError(f"Synthetic images need H and W >= {MIN_SIDE}, got {spec.shape}")
    if c < 1:
        raise DatasetError(f"Synthetic images need at least one channel, got {spec.shape}")
    if not 2 <= spec.classes <= len(PATTERNS):
        raise DatasetError(f"Synthetic datasets support 2 to {len(PATTERNS)} classes, got {spec.classes}")
    test_per_class = spec.per_class if spec.test_per_class is None else spec.test_per_class
    if spec.per_class < 2 or test_per_class < 0:
        raise DatasetError(f"per_class must be >= 2, got {spec.per_class}")
    if spec.noise < 0:
        raise DatasetError(f"noise must be >= 0, got {spec.noise}")

    train_seed, test_seed = np.random.SeedSequence(spec.seed).spawn(2)
    train = _split(spec, spec.per_class, np.random.default_rng(train_seed))
    test = _split(spec, test_per_class, np.random.default_rng(test_seed))
    logger.debug(
        "Generated synthetic dataset %s x %d classes: %d train / %d test", spec.shape, spec.classes, len(train), len(test)
    )
    return train, test
