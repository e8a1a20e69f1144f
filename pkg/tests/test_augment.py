"""Tests for augmentation ops, presets, sampling functions and distances."""

import numpy as np
import pytest

from src.augment.distance import perceptual_distance
from src.augment.ops import (
    apply_affine,
    apply_autocontrast,
    apply_color_jitter,
    apply_crop_pad,
    apply_gaussian_blur,
    apply_sharpness,
    gaussian_kernel1d,
)
from src.augment.presets import AUGMENTATION_KINDS, HIGH_RES, LOW_RES, get_preset
from src.augment.sampling import SamplingFunction, build_sampling
from src.utils.exceptions import AugmentationError


def _random_image(shape=(3, 16, 16), seed=0):
    return np.random.default_rng(seed).random(shape, dtype=np.float32)


def _blob(size=32, sigma=4.0):
    coords = np.arange(size) - (size - 1) / 2.0
    yy, xx = np.meshgrid(coords, coords, indexing="ij")
    return np.exp(-(yy ** 2 + xx ** 2) / (2 * sigma ** 2)).astype(np.float32)[None]


class TestPresets:
    def test_values(self):
        assert (HIGH_RES.rotation_deg, HIGH_RES.pad, HIGH_RES.blur_sigma, HIGH_RES.sharpness) == (2.0, 10, 1.0, 2.0)
        assert (LOW_RES.rotation_deg, LOW_RES.pad, LOW_RES.blur_sigma, LOW_RES.sharpness) == (4.0, 3, 1.9, 1.5)
        assert get_preset("high-res") is HIGH_RES

    def test_unknown_preset(self):
        with pytest.raises(AugmentationError, match="Valid presets"):
            get_preset("mid-res")

    def test_overrides(self):
        assert HIGH_RES.with_overrides({"pad": 4}).pad == 4
        with pytest.raises(AugmentationError, match="Unknown augmentation preset fields"):
            HIGH_RES.with_overrides({"zoom": 2})
        with pytest.raises(AugmentationError):
            HIGH_RES.with_overrides({"blur_kernel": 4})


class TestNeutralParameters:
    @pytest.mark.parametrize("op", [
        lambda x: apply_affine(x, 0.0, 0.0),
        lambda x: apply_color_jitter(x),
        lambda x: apply_crop_pad(x, 3, (3, 3)),
        lambda x: apply_sharpness(x, 1.0),
    ])
    def test_identity(self, op):
        x = _random_image()
        out = op(x)
        assert np.array_equal(out, x)
        assert out is not x


class TestColorJitter:
    def test_brightness(self):
        x = np.array([[[0.5, 1.0]]], dtype=np.float32)
        out = apply_color_jitter(x, brightness=1.05)
        assert out[0, 0, 0] == pytest.approx(0.525, abs=1e-6)
        assert out[0, 0, 1] == 1.0

    def test_contrast_zero_gives_mean(self):
        x = np.array([[[0.2, 0.4, 0.6]]], dtype=np.float32)
        out = apply_color_jitter(x, contrast=0.0)
        assert np.allclose(out, 0.4, atol=1e-6)

    def test_saturation_zero_gives_gray(self):
        out = apply_color_jitter(_random_image(), saturation=0.0)
        assert np.allclose(out[0], out[1], atol=1e-6) and np.allclose(out[1], out[2], atol=1e-6)

    def test_hue_shifts_compose(self):
        x = _random_image()
        assert np.allclose(apply_color_jitter(x, hue=0.5), apply_color_jitter(apply_color_jitter(x, hue=0.25), hue=0.25), atol=1e-5)

    def test_preset_bound(self):
        with pytest.raises(AugmentationError, match="brightness"):
            apply_color_jitter(_random_image(), brightness=1.2, preset=HIGH_RES)


class TestCropPad:
    def test_offset_zero_moves_content_down_right(self):
        x = _random_image((1, 6, 6))
        out = apply_crop_pad(x, 2, (0, 0))
        assert np.array_equal(out[:, 2:, 2:], x[:, :-2, :-2])
        assert not out[:, :2, :].any() and not out[:, :, :2].any()

    def test_offset_out_of_range(self):
        with pytest.raises(AugmentationError, match="Crop offset"):
            apply_crop_pad(_random_image(), 2, (5, 0))

    def test_pad_above_preset(self):
        with pytest.raises(AugmentationError, match="exceeds the preset pad"):
            apply_crop_pad(_random_image(), 4, (0, 0), preset=LOW_RES)


class TestGaussianBlur:
    def test_kernel_sums_to_one(self):
        taps = gaussian_kernel1d(5, 1.3)
        assert taps.sum() == pytest.approx(1.0)
        assert np.allclose(taps, taps[::-1])

    def test_constant_image_unchanged(self):
        x = np.full((3, 8, 8), 0.3, dtype=np.float32)
        assert np.allclose(apply_gaussian_blur(x, 3, 1.0), 0.3, atol=1e-6)

    def test_impulse_spreads_the_kernel(self):
        x = np.zeros((1, 7, 7), dtype=np.float32)
        x[0, 3, 3] = 1.0
        taps = gaussian_kernel1d(3, 1.0)
        out = apply_gaussian_blur(x, 3, 1.0)
        assert np.allclose(out[0, 2:5, 2:5], np.outer(taps, taps), atol=1e-6)
        assert out.sum() == pytest.approx(1.0, abs=1e-5)

    @pytest.mark.parametrize("kernel_size,sigma", [(4, 1.0), (3, 0.0), (0, 1.0)])
    def test_invalid_parameters(self, kernel_size, sigma):
        with pytest.raises(AugmentationError):
            apply_gaussian_blur(_random_image(), kernel_size, sigma)

    def test_sigma_above_preset(self):
        with pytest.raises(AugmentationError, match="sigma"):
            apply_gaussian_blur(_random_image(), 3, 1.5, preset=HIGH_RES)


class TestSharpness:
    def _image(self):
        x = np.full((1, 5, 5), 0.25, dtype=np.float32)
        x[0, 2, 2] = 0.5
        return x

    def test_factor_zero_is_smoothed(self):
        out = apply_sharpness(self._image(), 0.0)
        assert out[0, 2, 2] == pytest.approx(4.5 / 13, abs=1e-6)
        assert out[0, 0, 0] == 0.25

    def test_factor_two_extrapolates(self):
        out = apply_sharpness(self._image(), 2.0)
        assert out[0, 2, 2] == pytest.approx(1.0 - 4.5 / 13, abs=1e-6)
        assert out[0, 1, 1] == pytest.approx(0.5 - 3.5 / 13, abs=1e-6)
        assert out[0, 0, 2] == pytest.approx(0.25)

    def test_above_preset(self):
        with pytest.raises(AugmentationError):
            apply_sharpness(self._image(), 1.8, preset=LOW_RES)


class TestAutocontrast:
    def test_stretches_each_channel(self):
        x = np.array([[[0.25, 0.75]], [[0.4, 0.4]]], dtype=np.float32)
        out = apply_autocontrast(x)
        assert np.allclose(out[0], [[0.0, 1.0]])
        assert np.allclose(out[1], [[0.4, 0.4]])


class TestAffine:
    def test_one_pixel_shift(self):
        x = np.zeros((1, 8, 8), dtype=np.float32)
        x[0, 3, 3] = 1.0
        out = apply_affine(x, 0.0, (1 / 8, 0.0))
        assert out[0, 4, 3] == pytest.approx(1.0)
        assert out.sum() == pytest.approx(1.0)

    def test_rotation_round_trip_on_smooth_image(self):
        x = _blob()
        back = apply_affine(apply_affine(x, 2.0, 0.0), -2.0, 0.0)
        assert np.max(np.abs(back - x)) < 0.02

    def test_rotation_changes_image(self):
        x = _blob()
        x[0, 4:8, 20:24] = 1.0
        assert not np.allclose(apply_affine(x, 4.0, 0.0), x)

    def test_bounds(self):
        with pytest.raises(AugmentationError, match="rotation"):
            apply_affine(_random_image(), 3.0, 0.0, preset=HIGH_RES)
        with pytest.raises(AugmentationError, match="shift"):
            apply_affine(_random_image(), 0.0, (0.0, 0.2), preset=HIGH_RES)

    def test_rejects_non_image(self):
        with pytest.raises(AugmentationError, match="CHW"):
            apply_affine(np.zeros((4, 4), dtype=np.float32), 1.0, 0.0)


class TestSampling:
    def test_noise_zero_is_identity(self):
        x = _random_image()
        assert np.array_equal(SamplingFunction.noise(0.0, LOW_RES).sample(x), x)

    def test_noise_is_bounded(self):
        x = _random_image()
        out = SamplingFunction.noise(0.03, LOW_RES, seed=4).sample(x)
        assert np.max(np.abs(out - x)) <= 0.03 + 1e-6
        assert out.min() >= 0.0 and out.max() <= 1.0

    @pytest.mark.parametrize("mode", ["S1", "S2"])
    def test_same_seed_same_draws(self, mode):
        x = _random_image()
        a = build_sampling(mode, HIGH_RES, seed=3)
        b = build_sampling(mode, HIGH_RES, seed=3)
        for _ in range(4):
            assert np.array_equal(a.sample(x), b.sample(x))

    def test_outputs_stay_in_range(self):
        x = _random_image()
        s = build_sampling("S2", LOW_RES, seed=1)
        for _ in range(5):
            out = s.sample(x)
            assert out.shape == x.shape and out.dtype == np.float32
            assert out.min() >= 0.0 and out.max() <= 1.0

    def test_streams_are_independent_of_order(self):
        x = _random_image()
        s = build_sampling("S2", HIGH_RES, seed=9)
        direct = s.stream(5).sample(x)
        for i in range(5):
            s.stream(i).sample(x)
        assert np.array_equal(build_sampling("S2", HIGH_RES, seed=9).stream(5).sample(x), direct)
        assert not np.array_equal(s.stream(0).sample(x), s.stream(1).sample(x))

    def test_labels(self):
        assert build_sampling("S2", HIGH_RES).label == "S2"
        assert build_sampling("S1", HIGH_RES, augmentations=["sharpness"]).label == "S1:sharpness"
        assert SamplingFunction.noise(0.1, HIGH_RES).label == "noise"

    def test_augmentations_keep_canonical_order(self):
        s = build_sampling("S2", HIGH_RES, augmentations=["autocontrast", "random-affine"])
        assert s.augmentations == ("random-affine", "autocontrast")
        assert build_sampling("S2", HIGH_RES).augmentations == AUGMENTATION_KINDS

    @pytest.mark.parametrize("preset", [HIGH_RES, LOW_RES])
    def test_blur_uses_the_preset_sigma(self, preset):
        x = _random_image()
        s = build_sampling("S1", preset, augmentations=["gaussian-blur"], seed=2)
        draws = {s.sample(x).tobytes() for _ in range(20)}
        assert len(draws) == 1
        expected = apply_gaussian_blur(x, preset.blur_kernel, preset.blur_sigma)
        assert np.array_equal(s.sample(x), expected)

    def test_s1_autocontrast_always_fires(self):
        x = (0.3 + 0.4 * _random_image()).astype(np.float32)
        s = build_sampling("S1", LOW_RES, augmentations=["autocontrast"], seed=6)
        for _ in range(200):
            out = s.sample(x)
            assert not np.array_equal(out, x)
            assert np.array_equal(out, apply_autocontrast(x))

    def test_s2_autocontrast_is_a_coin_flip(self):
        x = (0.3 + 0.4 * _random_image()).astype(np.float32)
        s = build_sampling("S2", LOW_RES, augmentations=["autocontrast"], seed=6)
        fired = sum(not np.array_equal(s.sample(x), x) for _ in range(400))
        assert 140 <= fired <= 260

    def test_preset_rejects_non_positive_sigma(self):
        with pytest.raises(AugmentationError, match="blur_sigma"):
            HIGH_RES.with_overrides({"blur_sigma": 0.0})

    @pytest.mark.parametrize("kwargs", [
        {"mode": "S3"},
        {"mode": "S2", "augmentations": ["mixup"]},
        {"mode": "S1", "augmentations": []},
        {"mode": "noise", "epsilon": -0.1},
    ])
    def test_invalid(self, kwargs):
        with pytest.raises(AugmentationError):
            build_sampling(preset=HIGH_RES, **kwargs)


class TestPerceptualDistance:
    def test_values(self):
        a = np.zeros((1, 2, 2), dtype=np.float32)
        b = a.copy()
        b[0, 0, 0], b[0, 1, 1] = 0.3, 0.4
        d = perceptual_distance(a, b)
        assert d.l2 == pytest.approx(0.5)
        assert d.linf == pytest.approx(0.4)
        assert perceptual_distance(a, a).l2 == 0.0

    def test_shape_mismatch(self):
        with pytest.raises(AugmentationError):
            perceptual_distance(np.zeros((1, 2, 2)), np.zeros((1, 2, 3)))
