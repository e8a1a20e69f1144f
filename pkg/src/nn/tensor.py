"""
Image tensors and labelled samples.

Images are dense CHW ``float32`` arrays with intensities in [0, 1]; batches
add a leading N axis (NCHW). Everything that touches pixels goes through
``as_image``/``as_batch`` so shape and dtype are checked once at the edge.
"""

from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np
import numpy.typing as npt

from src.utils.exceptions import ShapeError

ImageTensor = npt.NDArray[np.float32]
Shape = Tuple[int, int, int]


def as_image(x: npt.ArrayLike, expected_shape: Sequence[int] | None = None) -> ImageTensor:
    """
    Coerce an array to a CHW float32 image.

    Args:
        x: Array-like image.
        expected_shape: Optional (C, H, W) the image must have.

    Returns:
        A float32 CHW array (a view when no conversion is needed).

    Raises:
        ShapeError: If the array is not three-dimensional or has the wrong shape.
    """
    image = np.asarray(x, dtype=np.float32)
    if image.ndim != 3:
        raise ShapeError(f"Expected a CHW image, got array with shape {image.shape}")
    if expected_shape is not None and tuple(image.shape) != tuple(expected_shape):
        raise ShapeError(f"Expected image shape {tuple(expected_shape)}, got {image.shape}")
    return image


def as_batch(x: npt.ArrayLike) -> Tuple[np.ndarray, bool]:
    """
    Turn a CHW image or an NCHW batch into an NCHW batch.

    Returns:
        (batch, was_single): the batch and whether a leading axis was added.
    """
    array = np.asarray(x)
    if array.ndim == 3:
        return array[None], True
    if array.ndim == 4:
        return array, False
    raise ShapeError(f"Expected a CHW image or NCHW batch, got array with shape {array.shape}")


@dataclass(frozen=True)
class LabeledSample:
    """
    One image with its class label.

    Attributes:
        image: CHW float32 image in [0, 1].
        label: Class index in [0, K).
        sample_id: Position of the sample in its dataset split (-1 if unknown).
    """
    image: ImageTensor
    label: int
    sample_id: int = -1


def stack_samples(samples: Sequence[LabeledSample]) -> Tuple[np.ndarray, np.ndarray]:
    """
    Stack samples into an NCHW image batch and an int64 label vector.

    Raises:
        ShapeError: If the samples do not all share one shape.
    """
    if not samples:
        return np.zeros((0, 0, 0, 0), dtype=np.float32), np.zeros((0,), dtype=np.int64)
    shapes = {s.image.shape for s in samples}
    if len(shapes) != 1:
        raise ShapeError(f"Samples have inconsistent shapes: {sorted(shapes)}")
    images = np.stack([s.image for s in samples]).astype(np.float32, copy=False)
    labels = np.asarray([s.label for s in samples], dtype=np.int64)
    return images, labels


def unstack_samples(images: np.ndarray, labels: Sequence[int]) -> List[LabeledSample]:
    """Inverse of ``stack_samples``; sample ids are the batch positions."""
    return [
        LabeledSample(image=as_image(images[i]), label=int(labels[i]), sample_id=i)
        for i in range(len(labels))
    ]
