"""
The augmentation set: affine, colour jitter, crop-pad, Gaussian blur,
sharpness and autocontrast on CHW float images in [0, 1].

Every op returns a new float32 image of the input shape, clamped to [0, 1].
Neutral parameters return an exact copy of the input. When a preset is
passed, parameters outside its bounds are rejected.
"""

from typing import Optional, Sequence, Tuple, Union

import numpy as np
from scipy import ndimage
from skimage.color import hsv2rgb, rgb2hsv

from src.augment.presets import AugmentationPreset
from src.nn.tensor import ImageTensor, as_image
from src.utils.exceptions import AugmentationError, ShapeError

TOLERANCE = 1e-9
LUMA = np.array([0.299, 0.587, 0.114], dtype=np.float32)
SHARPNESS_KERNEL = np.array([[1, 1, 1], [1, 5, 1], [1, 1, 1]], dtype=np.float32) / 13.0


def _image(x: np.ndarray) -> ImageTensor:
    try:
        return as_image(x)
    except ShapeError as e:
        raise AugmentationError(f"Augmentations need a CHW image: {e}", cause=e) from e


def _clamp(x: np.ndarray) -> ImageTensor:
    return np.clip(x, 0.0, 1.0).astype(np.float32, copy=False)


def _check(value: float, bound: float, name: str) -> None:
    if abs(value) > bound + TOLERANCE:
        raise AugmentationError(f"{name} {value} is outside the preset bound ±{bound}")


def _grayscale(x: np.ndarray) -> np.ndarray:
    if x.shape[0] == 3:
        return np.tensordot(LUMA, x, axes=1)
    return x.mean(axis=0)


def apply_affine(
    x: np.ndarray,
    rotation_deg: float,
    shift_frac: Union[float, Tuple[float, float]],
    preset: Optional[AugmentationPreset] = None,
) -> ImageTensor:
    """
    Rotate about the image centre and translate, with bilinear resampling and zero fill.

    Args:
        x: CHW image.
        rotation_deg: Rotation angle in degrees (counter-clockwise).
        shift_frac: Translation as a fraction of (H, W); a scalar shifts both axes.
            Positive values move content down/right.
        preset: Optional bounds to enforce.

    Raises:
        AugmentationError: If a parameter exceeds the preset bounds.
    """
    image = _image(x)
    shift_y, shift_x = (shift_frac, shift_frac) if np.isscalar(shift_frac) else shift_frac
    if preset is not None:
        _check(rotation_deg, preset.rotation_deg, "rotation")
        _check(shift_y, preset.shift_frac, "vertical shift")
        _check(shift_x, preset.shift_frac, "horizontal shift")
    if rotation_deg == 0 and shift_y == 0 and shift_x == 0:
        return image.copy()

    _, h, w = image.shape
    theta = np.deg2rad(rotation_deg)
    # forward map in (row, col): p_out = R (p_in - c) + c + t
    rotation = np.array([[np.cos(theta), np.sin(theta)], [-np.sin(theta), np.cos(theta)]])
    inverse = rotation.T
    centre = np.array([(h - 1) / 2.0, (w - 1) / 2.0])
    translation = np.array([shift_y * h, shift_x * w])
    offset = centre - inverse @ (centre + translation)
    out = np.stack([
        ndimage.affine_transform(channel, inverse, offset=offset, order=1, mode="constant", cval=0.0)
        for channel in image
    ])
    return _clamp(out)


def apply_color_jitter(
    x: np.ndarray,
    brightness: float = 1.0,
    contrast: float = 1.0,
    saturation: float = 1.0,
    hue: float = 0.0,
    preset: Optional[AugmentationPreset] = None,
) -> ImageTensor:
    """
    Brightness, contrast, saturation and hue adjustments, applied in that order.

    Saturation and hue only apply to RGB images; other channel counts skip them.

    Raises:
        AugmentationError: If a factor exceeds the preset bounds.
    """
    image = _image(x)
    if preset is not None:
        _check(brightness - 1.0, preset.brightness, "brightness factor deviation")
        _check(contrast - 1.0, preset.contrast, "contrast factor deviation")
        _check(saturation - 1.0, preset.saturation, "saturation factor deviation")
        _check(hue, preset.hue, "hue shift")
    if min(brightness, contrast, saturation) < 0:
        raise AugmentationError("Colour-jitter factors must be non-negative")

    out = image.copy()
    if brightness != 1.0:
        out = _clamp(out * np.float32(brightness))
    if contrast != 1.0:
        mean = np.float32(_grayscale(out).mean())
        out = _clamp(np.float32(contrast) * out + np.float32(1.0 - contrast) * mean)
    if image.shape[0] == 3:
        if saturation != 1.0:
            gray = _grayscale(out)[None]
            out = _clamp(np.float32(saturation) * out + np.float32(1.0 - saturation) * gray)
        if hue != 0.0:
            hsv = rgb2hsv(out.transpose(1, 2, 0))
            hsv[..., 0] = np.mod(hsv[..., 0] + hue, 1.0)
            out = _clamp(hsv2rgb(hsv).transpose(2, 0, 1).astype(np.float32))
    return out


def apply_crop_pad(
    x: np.ndarray,
    pad: int,
    offset: Sequence[int],
    preset: Optional[AugmentationPreset] = None,
) -> ImageTensor:
    """
    Zero-pad by ``pad`` on every side and crop back to the input shape at ``offset``.

    Args:
        x: CHW image.
        pad: Padding in pixels.
        offset: (row, col) of the crop window in the padded image, each in [0, 2 * pad].
        preset: Optional bounds to enforce (pad must not exceed the preset pad).

    Raises:
        AugmentationError: If pad or offset are out of range.
    """
    image = _image(x)
    oy, ox = (int(v) for v in offset)
    if pad < 0 or not (0 <= oy <= 2 * pad and 0 <= ox <= 2 * pad):
        raise AugmentationError(f"Crop offset {tuple(offset)} outside [0, {2 * pad}] for pad {pad}")
    if preset is not None and pad > preset.pad:
        raise AugmentationError(f"pad {pad} exceeds the preset pad {preset.pad}")
    _, h, w = image.shape
    padded = np.pad(image, ((0, 0), (pad, pad), (pad, pad)))
    return padded[:, oy:oy + h, ox:ox + w].copy()


def gaussian_kernel1d(kernel_size: int, sigma: float) -> np.ndarray:
    """Normalised 1-D Gaussian taps (sum to 1)."""
    half = (kernel_size - 1) / 2.0
    taps = np.exp(-0.5 * (np.arange(kernel_size) - half) ** 2 / sigma ** 2)
    return taps / taps.sum()


def apply_gaussian_blur(
    x: np.ndarray,
    kernel_size: int = 3,
    sigma: float = 1.0,
    preset: Optional[AugmentationPreset] = None,
) -> ImageTensor:
    """
    Separable Gaussian blur with reflect padding.

    Raises:
        AugmentationError: If the kernel is not a positive odd size, sigma is not
            positive, or either exceeds the preset.
    """
    image = _image(x)
    if kernel_size < 1 or kernel_size % 2 == 0:
        raise AugmentationError(f"kernel_size must be a positive odd integer, got {kernel_size}")
    if sigma <= 0:
        raise AugmentationError(f"sigma must be positive, got {sigma}")
    if preset is not None:
        if kernel_size != preset.blur_kernel:
            raise AugmentationError(f"kernel_size {kernel_size} differs from the preset kernel {preset.blur_kernel}")
        if sigma > preset.blur_sigma + TOLERANCE:
            raise AugmentationError(f"sigma {sigma} exceeds the preset bound {preset.blur_sigma}")
    taps = gaussian_kernel1d(kernel_size, sigma)
    out = ndimage.correlate1d(image.astype(np.float64), taps, axis=1, mode="mirror")
    out = ndimage.correlate1d(out, taps, axis=2, mode="mirror")
    return _clamp(out)


def apply_sharpness(x: np.ndarray, factor: float, preset: Optional[AugmentationPreset] = None) -> ImageTensor:
    """
    Blend the image with a smoothed copy: ``factor * x + (1 - factor) * smooth(x)``.

    The smoothing kernel is [[1,1,1],[1,5,1],[1,1,1]] / 13 on interior pixels;
    border pixels are kept. Factor 1 is the identity, 0 the smoothed image.

    Raises:
        AugmentationError: If the factor is negative or exceeds the preset.
    """
    image = _image(x)
    if factor < 0:
        raise AugmentationError(f"sharpness factor must be non-negative, got {factor}")
    if preset is not None and factor > preset.sharpness + TOLERANCE:
        raise AugmentationError(f"sharpness factor {factor} exceeds the preset {preset.sharpness}")
    if factor == 1.0:
        return image.copy()
    degenerate = image.copy()
    if image.shape[1] >= 3 and image.shape[2] >= 3:
        smooth = np.stack([ndimage.correlate(channel, SHARPNESS_KERNEL, mode="nearest") for channel in image])
        degenerate[:, 1:-1, 1:-1] = smooth[:, 1:-1, 1:-1]
    if factor == 0.0:
        return _clamp(degenerate)
    return _clamp(np.float32(factor) * image + np.float32(1.0 - factor) * degenerate)


def apply_autocontrast(x: np.ndarray) -> ImageTensor:
    """Per-channel linear remap of [min, max] onto [0, 1]; constant channels are left unchanged."""
    image = _image(x)
    out = image.copy()
    for c, channel in enumerate(image):
        low, high = channel.min(), channel.max()
        if high > low:
            out[c] = (channel - low) / (high - low)
    return _clamp(out)
