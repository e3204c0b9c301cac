"""Tests for preprocessing defenses and the MSE anomaly detector."""

from __future__ import annotations

import numpy as np
import pytest
from scipy import fft as sp_fft

from vipatch import (
    ConfigError,
    DefenseConfig,
    ImagePair,
    apply_defense,
    attack_under_defense,
    detection_threshold,
    jpeg_compress,
    median_filter,
    mse_detect,
    psnr,
    quantization_table,
)
from vipatch.defenses import _DCT, JPEG_LUMA_TABLE

from conftest import random_pair, random_plane, random_rgb
from oracles import median_filter_ref, mse_ref


class TestDefenseConfig:
    def test_rejects_unknown_kind(self):
        with pytest.raises(ConfigError):
            DefenseConfig(kind="blur")

    @pytest.mark.parametrize("quality", [0, 101])
    def test_rejects_quality_outside_range(self, quality):
        with pytest.raises(ConfigError):
            DefenseConfig(kind="jpeg", jpeg_quality=quality)

    @pytest.mark.parametrize("kernel", [1, 2, 4])
    def test_rejects_bad_median_kernel(self, kernel):
        with pytest.raises(ConfigError):
            DefenseConfig(kind="median", median_kernel=kernel)

    def test_rejects_negative_threshold(self):
        with pytest.raises(ConfigError):
            DefenseConfig(kind="mse_detector", mse_threshold=-0.1)

    def test_uncalibrated_detector_is_representable(self):
        config = DefenseConfig(kind="mse_detector")
        assert config.mse_threshold is None

    def test_describe_strings(self):
        assert DefenseConfig().describe() == "none"
        assert DefenseConfig(kind="jpeg", jpeg_quality=60).describe() == "jpeg(q=60)"
        assert DefenseConfig(kind="median", median_kernel=5).describe() == "median(k=5)"
        assert "mse_detector" in DefenseConfig(kind="mse_detector").describe()


class TestQuantizationTable:
    def test_quality_50_is_base_table(self):
        # scale = 100, so floor((t*100 + 50) / 100) = t for integer t.
        assert np.array_equal(quantization_table(50), JPEG_LUMA_TABLE)

    def test_quality_25_doubles_base_table(self):
        # scale = 200, so floor((t*200 + 50) / 100) = 2t; max entry 242 < 255.
        assert np.array_equal(quantization_table(25), 2.0 * JPEG_LUMA_TABLE)

    def test_quality_100_is_all_ones(self):
        assert np.all(quantization_table(100) == 1.0)

    def test_quality_1_saturates_at_255(self):
        assert np.all(quantization_table(1) == 255.0)

    def test_coarseness_decreases_with_quality(self):
        sums = [quantization_table(q).sum() for q in (10, 30, 50, 75, 95)]
        assert sums == sorted(sums, reverse=True)

    def test_rejects_quality_outside_range(self):
        with pytest.raises(ConfigError):
            quantization_table(0)


class TestJpegCompress:
    def test_dct_matrix_matches_scipy_orthonormal_dct(self, rng):
        block = rng.uniform(-128.0, 127.0, size=(8, 8))
        ours = _DCT @ block @ _DCT.T
        reference = sp_fft.dctn(block, type=2, norm="ortho")
        assert ours == pytest.approx(reference, abs=1e-10)
        assert _DCT @ _DCT.T == pytest.approx(np.eye(8), abs=1e-12)

    @pytest.mark.parametrize("quality", [10, 50, 75, 95])
    def test_mid_gray_is_reconstructed_exactly(self, quality):
        # 128/255 level-shifts to ~0, every coefficient quantizes to zero,
        # and the inverse path reproduces the same double exactly.
        plane = np.full((24, 24), 128.0 / 255.0)
        assert np.array_equal(jpeg_compress(plane, quality), plane)

    def test_compression_is_lossy_on_noise(self, rng):
        plane = random_plane(rng, 32, 32)
        out = jpeg_compress(plane, 75)
        assert mse_ref(plane.tolist(), out.tolist()) > 0.0
        assert out.min() >= 0.0 and out.max() <= 1.0

    def test_higher_quality_is_more_faithful(self, rng):
        plane = random_plane(rng, 32, 32)
        assert psnr(plane, jpeg_compress(plane, 95)) > psnr(plane, jpeg_compress(plane, 10))

    def test_low_quality_flattens_checkerboard(self):
        y, x = np.mgrid[0:16, 0:16]
        checker = ((y + x) % 2).astype(np.float64)
        out = jpeg_compress(checker, 10)
        assert out.std() < checker.std()

    @pytest.mark.parametrize("shape", [(9, 13), (17, 24), (8, 8)])
    def test_shape_preserved_for_partial_blocks(self, rng, shape):
        plane = random_plane(rng, *shape)
        out = jpeg_compress(plane, 75)
        assert out.shape == shape
        assert np.all(np.isfinite(out))

    def test_rgb_channels_compressed_independently(self, rng):
        image = random_rgb(rng, 16, 16)
        out = jpeg_compress(image, 60)
        for c in range(3):
            assert np.array_equal(out[..., c], jpeg_compress(image[..., c], 60))


class TestMedianFilter:
    @pytest.mark.parametrize("kernel", [3, 5])
    def test_matches_reference(self, rng, kernel):
        plane = random_plane(rng, 12, 10)
        expected = np.array(median_filter_ref(plane.tolist(), kernel))
        assert median_filter(plane, kernel) == pytest.approx(expected, abs=1e-12)

    def test_removes_isolated_impulse(self):
        plane = np.zeros((9, 9))
        plane[4, 4] = 1.0
        assert np.all(median_filter(plane, 3) == 0.0)

    def test_preserves_constant(self):
        plane = np.full((7, 7), 0.4)
        assert np.array_equal(median_filter(plane, 3), plane)

    def test_rgb_channels_filtered_independently(self, rng):
        image = random_rgb(rng, 10, 10)
        out = median_filter(image, 3)
        for c in range(3):
            assert np.array_equal(out[..., c], median_filter(image[..., c], 3))

    @pytest.mark.parametrize("kernel", [2, 1])
    def test_rejects_bad_kernel(self, kernel):
        with pytest.raises(ConfigError):
            median_filter(np.zeros((5, 5)), kernel)


class TestMseDetector:
    def test_flags_only_above_threshold(self):
        # 0.25 and its square are exact doubles, so the boundary is sharp.
        ref = np.zeros((4, 4))
        shifted = np.full((4, 4), 0.25)
        flagged, value = mse_detect(shifted, ref, threshold=0.05)
        assert flagged and value == 0.0625
        flagged, value = mse_detect(shifted, ref, threshold=0.0625)
        assert not flagged  # strict inequality at the boundary

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ConfigError):
            mse_detect(np.zeros((4, 4)), np.zeros((4, 5)), threshold=0.1)

    def test_threshold_calibration_hand_case(self):
        # Linear-interpolated 95th percentile of [1, 2, 3, 4] is 3.85.
        assert detection_threshold(np.array([1.0, 2.0, 3.0, 4.0]), 0.95) == pytest.approx(3.85)

    def test_threshold_median_case(self):
        assert detection_threshold(np.array([0.0, 1.0]), 0.5) == pytest.approx(0.5)

    def test_calibration_needs_samples(self):
        with pytest.raises(ConfigError):
            detection_threshold(np.array([]))

    def test_calibrated_threshold_passes_most_clean_samples(self, rng):
        clean = rng.uniform(0.0, 1.0, size=200)
        threshold = detection_threshold(clean, 0.95)
        flags = np.sum(clean > threshold)
        assert flags <= 10  # at most 5% of 200


class TestApplyDefense:
    def test_none_is_pass_through(self, small_pair):
        assert apply_defense(small_pair, DefenseConfig()) is small_pair

    def test_detector_kind_is_pass_through(self, small_pair):
        config = DefenseConfig(kind="mse_detector", mse_threshold=0.1)
        assert apply_defense(small_pair, config) is small_pair

    def test_jpeg_applies_to_both_modalities(self, small_pair):
        config = DefenseConfig(kind="jpeg", jpeg_quality=60)
        defended = apply_defense(small_pair, config)
        assert np.array_equal(defended.visible, jpeg_compress(small_pair.visible, 60))
        assert np.array_equal(defended.infrared, jpeg_compress(small_pair.infrared, 60))

    def test_median_applies_to_both_modalities(self, small_pair):
        config = DefenseConfig(kind="median", median_kernel=3)
        defended = apply_defense(small_pair, config)
        assert np.array_equal(defended.visible, median_filter(small_pair.visible, 3))
        assert np.array_equal(defended.infrared, median_filter(small_pair.infrared, 3))

    def test_attack_under_defense_feeds_defended_pair(self, rng):
        pair = random_pair(rng, 16, 16)
        config = DefenseConfig(kind="median", median_kernel=3)
        seen: list[ImagePair] = []

        def evaluate(p: ImagePair):
            seen.append(p)
            return None

        attack_under_defense(pair, config, evaluate)
        assert len(seen) == 1
        expected = apply_defense(pair, config)
        assert np.array_equal(seen[0].visible, expected.visible)
        assert np.array_equal(seen[0].infrared, expected.infrared)
