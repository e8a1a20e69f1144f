"""
Distances between images.
"""

from dataclasses import dataclass

import numpy as np

from src.utils.exceptions import AugmentationError


@dataclass(frozen=True)
class PerceptualDistance:
    """
    Attributes:
        l2: Euclidean norm of the difference.
        linf: Largest absolute pixel difference.
    """
    l2: float
    linf: float

    def to_dict(self) -> dict:
        return {"l2": self.l2, "linf": self.linf}


def perceptual_distance(a: np.ndarray, b: np.ndarray) -> PerceptualDistance:
    """
    L2 and L-infinity distances, computed in float64.

    Raises:
        AugmentationError: If the shapes differ.
    """
    a64 = np.asarray(a, dtype=np.float64)
    b64 = np.asarray(b, dtype=np.float64)
    if a64.shape != b64.shape:
        raise AugmentationError(f"Cannot compare images of shapes {a64.shape} and {b64.shape}")
    diff = a64 - b64
    if diff.size == 0:
        return PerceptualDistance(0.0, 0.0)
    return PerceptualDistance(l2=float(np.sqrt(np.sum(diff * diff))), linf=float(np.max(np.abs(diff))))
