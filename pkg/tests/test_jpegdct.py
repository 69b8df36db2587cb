"""Block-DCT degradation tests.

The quantizer-table scaling and the flat-image error bound are checked
against values worked out by hand from the table formula: for a flat gray
image only the DC coefficient is nonzero (8 times the level-shifted value,
with the orthonormal transform), so the worst reconstruction error is the
DC quantizer over 16 plus final rounding.
"""

import math

import numpy as np
import pytest

from capood.images import RasterImage
from capood.jpegdct import CHROMA_TABLE, LUMA_TABLE, jpeg_corrupt, scaled_table
from capood.rng import byte_block
from capood.errors import ValidationError


def noise_image(seed, w=32, h=32):
    return RasterImage(byte_block(seed, w * h * 3).reshape(h, w, 3))


class TestScaledTable:
    def test_quality_50_is_base_table(self):
        assert np.array_equal(scaled_table(LUMA_TABLE, 50), LUMA_TABLE)
        assert np.array_equal(scaled_table(CHROMA_TABLE, 50), CHROMA_TABLE)

    def test_quality_100_is_all_ones(self):
        assert np.all(scaled_table(LUMA_TABLE, 100) == 1)
        assert np.all(scaled_table(CHROMA_TABLE, 100) == 1)

    def test_quality_10_hand_values(self):
        scaled = scaled_table(LUMA_TABLE, 10)
        assert scaled[0, 0] == 80
        assert scaled[0, 1] == 55

    def test_quality_1_saturates_at_255(self):
        assert np.all(scaled_table(LUMA_TABLE, 1) == 255)
        assert np.all(scaled_table(CHROMA_TABLE, 1) == 255)

    def test_quality_90_hand_value(self):
        assert scaled_table(LUMA_TABLE, 90)[0, 0] == 3

    @pytest.mark.parametrize("quality", [0, 101, -5])
    def test_rejects_out_of_range_quality(self, quality):
        with pytest.raises(ValidationError):
            scaled_table(LUMA_TABLE, quality)
        with pytest.raises(ValidationError):
            jpeg_corrupt(noise_image(0, 8, 8), quality)


def flat_error_bound(quality):
    """Worst per-pixel error for a flat gray input at this quality."""
    dc = int(scaled_table(LUMA_TABLE, quality)[0, 0])
    return math.ceil(dc / 16.0) + 1


class TestFlatImages:
    @pytest.mark.parametrize("quality", [10, 25, 50, 75, 100])
    @pytest.mark.parametrize("value", [0, 61, 128, 200, 255])
    def test_flat_gray_error_bound(self, quality, value):
        img = RasterImage.filled(24, 16, (value, value, value))
        out = jpeg_corrupt(img, quality)
        err = np.abs(out.pixels.astype(int) - img.pixels.astype(int)).max()
        assert err <= flat_error_bound(quality)

    @pytest.mark.parametrize("quality", [50, 75, 100])
    def test_flat_gray_within_two_at_high_quality(self, quality):
        for value in (3, 90, 128, 250):
            img = RasterImage.filled(16, 16, (value, value, value))
            out = jpeg_corrupt(img, quality)
            err = np.abs(out.pixels.astype(int) - img.pixels.astype(int)).max()
            assert err <= 2

    def test_flat_color_near_identity_at_quality_90(self):
        img = RasterImage.filled(16, 16, (37, 142, 201))
        out = jpeg_corrupt(img, 90)
        err = np.abs(out.pixels.astype(int) - img.pixels.astype(int)).max()
        assert err <= 2

    def test_flat_output_is_flat(self):
        out = jpeg_corrupt(RasterImage.filled(32, 24, (128, 128, 128)), 10)
        for ch in range(3):
            assert len(np.unique(out.pixels[..., ch])) == 1


class TestDegradation:
    def test_quality_100_close_to_identity(self):
        img = noise_image(5)
        out = jpeg_corrupt(img, 100)
        err = np.abs(out.pixels.astype(int) - img.pixels.astype(int)).max()
        assert err <= 4

    def test_error_grows_as_quality_drops(self):
        img = noise_image(9, 48, 48)

        def mse(quality):
            out = jpeg_corrupt(img, quality)
            diff = out.pixels.astype(float) - img.pixels.astype(float)
            return float(np.mean(diff * diff))

        m90, m50, m10 = mse(90), mse(50), mse(10)
        assert m10 > m50 > m90 > 0

    def test_low_quality_actually_destroys_detail(self):
        img = noise_image(2, 64, 64)
        out = jpeg_corrupt(img, 10)
        diff = np.abs(out.pixels.astype(int) - img.pixels.astype(int))
        assert float(diff.mean()) > 10.0

    def test_deterministic(self):
        img = noise_image(4)
        a = jpeg_corrupt(img, 10)
        b = jpeg_corrupt(img, 10)
        assert a == b

    @pytest.mark.parametrize("size", [(1, 1), (8, 8), (65, 67), (3, 17)])
    def test_shape_preserved_with_padding(self, size):
        w, h = size
        img = noise_image(6, w, h)
        out = jpeg_corrupt(img, 30)
        assert (out.width, out.height) == (w, h)

    def test_input_not_mutated(self):
        img = noise_image(8)
        before = img.pixels.copy()
        jpeg_corrupt(img, 10)
        assert np.array_equal(img.pixels, before)
