"""Raster model, TIFF round-trips, resampling and box-filter oracles."""

import numpy as np
import pytest
import tifffile
from hypothesis import given, settings, strategies as st

from pansr.raster import (
    RasterImage,
    ResampleSpec,
    SAMPLE_MAX,
    box_filter,
    denormalize,
    normalize,
    quantize,
    read_raster,
    resample,
    upsample_bicubic,
    write_raster,
    _cubic_weights,
)
from conftest import random_image


class TestRasterImage:
    def test_shape_and_roles(self):
        img = random_image(0)
        assert img.bands == 4 and img.height == 64 and img.width == 64
        assert img.band_roles == ("R", "G", "B", "NIR")

    def test_rejects_bad_dimensionality(self):
        with pytest.raises(ValueError, match="bands, height, width"):
            RasterImage(np.zeros((8, 8)), ("PAN",))

    def test_rejects_multi_band_pan(self):
        with pytest.raises(ValueError, match="exactly one band"):
            RasterImage(np.zeros((2, 4, 4)), ("PAN", "R"))

    def test_rejects_unknown_role(self):
        with pytest.raises(ValueError, match="unknown band role"):
            RasterImage(np.zeros((1, 4, 4)), ("X",))

    def test_out_of_domain_values_are_representable(self):
        # Unclamped processing output may legally exceed the domain in memory.
        img = RasterImage(np.full((1, 4, 4), 5000.0), ("PAN",))
        assert not img.in_domain()


class TestQuantize:
    def test_round_half_away_from_zero(self):
        assert quantize(np.array([[[0.5]]]))[0, 0, 0] == 1
        assert quantize(np.array([[[1.5]]]))[0, 0, 0] == 2
        assert quantize(np.array([[[2.5]]]))[0, 0, 0] == 3

    def test_clamps_to_domain(self):
        arr = np.array([[[-5.0, 4096.2, 4094.7]]])
        out = quantize(arr)
        assert out.tolist() == [[[0, 4095, 4095]]]
        assert out.dtype == np.uint16

    def test_integers_fixed(self):
        vals = np.arange(0.0, 4096.0).reshape(1, 64, 64)
        assert np.array_equal(quantize(vals).astype(np.float64), vals)


class TestFileRoundTrip:
    def test_integral_image_round_trips_exactly(self, tmp_path):
        img = random_image(3)
        path = tmp_path / "x.tif"
        write_raster(img, path)
        back = read_raster(path)
        assert np.array_equal(back.data, img.data)
        assert back.band_roles == img.band_roles

    def test_twenty_randomized_round_trips(self, tmp_path):
        for seed in range(20):
            bands = 1 if seed % 3 == 0 else 4
            img = random_image(seed, bands=bands, size=16 + (seed % 5) * 8)
            path = tmp_path / f"rt{seed}.tif"
            write_raster(img, path)
            back = read_raster(path)
            assert np.array_equal(back.data, img.data), f"seed {seed}"
            assert back.band_roles == img.band_roles

    def test_sidecar_carries_roles_and_pixel_size(self, tmp_path):
        img = RasterImage(np.rint(random_image(5).data), ("NIR", "R", "G", "B"), pixel_size=2.0)
        path = tmp_path / "y.tif"
        write_raster(img, path)
        back = read_raster(path)
        assert back.band_roles == ("NIR", "R", "G", "B")
        assert back.pixel_size == 2.0

    def test_geo_tags_preserved(self, tmp_path):
        img = random_image(7, bands=1)
        tagged = RasterImage(
            img.data,
            ("PAN",),
            geo_tags=((33550, 12, 3, (0.5, 0.5, 0.0)),),
        )
        path = tmp_path / "geo.tif"
        write_raster(tagged, path)
        back = read_raster(path)
        assert back.geo_tags and back.geo_tags[0][0] == 33550
        assert back.geo_tags[0][3] == pytest.approx((0.5, 0.5, 0.0))

    def test_rejects_compressed(self, tmp_path):
        path = tmp_path / "z.tif"
        tifffile.imwrite(path, np.zeros((8, 8), np.uint16), compression="zlib")
        with pytest.raises(ValueError, match="uncompressed"):
            read_raster(path)

    def test_rejects_wrong_dtype(self, tmp_path):
        path = tmp_path / "b.tif"
        tifffile.imwrite(path, np.zeros((8, 8), np.uint8))
        with pytest.raises(ValueError, match="16-bit"):
            read_raster(path)

    def test_rejects_out_of_domain_samples(self, tmp_path):
        path = tmp_path / "c.tif"
        tifffile.imwrite(path, np.full((8, 8), 4096, np.uint16))
        with pytest.raises(ValueError, match="12-bit domain"):
            read_raster(path)

    def test_rejects_bad_band_count(self, tmp_path):
        path = tmp_path / "d.tif"
        tifffile.imwrite(path, np.zeros((8, 8, 3), np.uint16), photometric="rgb")
        with pytest.raises(ValueError, match="band count"):
            read_raster(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ValueError, match="unreadable"):
            read_raster(tmp_path / "nope.tif")


class TestCubicKernel:
    def test_partition_of_unity(self):
        # For any phase t, the four tap weights must sum to exactly 1.
        for t in np.linspace(0.0, 1.0, 101):
            w = sum(_cubic_weights(np.array([t - k]), -0.5)[0] for k in (-1, 0, 1, 2))
            assert w == pytest.approx(1.0, abs=1e-12)

    def test_interpolates_exactly_at_integers(self):
        assert _cubic_weights(np.array([0.0]), -0.5)[0] == 1.0
        assert _cubic_weights(np.array([1.0]), -0.5)[0] == 0.0
        assert _cubic_weights(np.array([2.0]), -0.5)[0] == 0.0


class TestResampling:
    def test_bicubic_preserves_constants(self):
        img = RasterImage(np.full((4, 8, 8), 1234.0), ("R", "G", "B", "NIR"))
        up = resample(img, ResampleSpec(4, "bicubic"), "up")
        assert up.data.shape == (4, 32, 32)
        np.testing.assert_allclose(up.data, 1234.0, atol=1e-9)

    def test_bicubic_reproduces_linear_ramps(self):
        # Cubic convolution is exact on degree-<=1 signals away from borders.
        ramp = np.arange(16.0)[None, None, :].repeat(16, axis=1)
        up = upsample_bicubic(ramp, 2)
        expect = (np.arange(32) + 0.5) * 0.5 - 0.5
        np.testing.assert_allclose(up[0, 8, 4:-4], expect[4:-4], atol=1e-9)

    def test_upsample_then_average_downsample_is_identity_on_constants(self):
        img = random_image(11)
        up = resample(img, ResampleSpec(4, "bicubic"), "up")
        down = resample(up, ResampleSpec(4, "average"), "down")
        assert down.data.shape == img.data.shape

    def test_average_matches_block_mean_oracle(self, rng):
        data = rng.uniform(0, SAMPLE_MAX, (4, 12, 8))
        img = RasterImage(data, ("R", "G", "B", "NIR"))
        down = resample(img, ResampleSpec(4, "average"), "down")
        for b in range(4):
            for i in range(3):
                for j in range(2):
                    assert down.data[b, i, j] == pytest.approx(
                        data[b, 4 * i : 4 * i + 4, 4 * j : 4 * j + 4].mean(), rel=1e-12
                    )

    def test_nearest_upsample_replicates(self):
        data = np.arange(4.0).reshape(1, 2, 2)
        up = resample(RasterImage(data, ("PAN",)), ResampleSpec(2, "nearest"), "up")
        expect = data.repeat(2, axis=1).repeat(2, axis=2)
        np.testing.assert_array_equal(up.data, expect)

    def test_downsample_requires_divisible_dims(self):
        img = random_image(1, size=30)
        with pytest.raises(ValueError, match="divisible"):
            resample(img, ResampleSpec(4, "average"), "down")

    def test_average_rejects_upsampling(self):
        img = random_image(1, size=8)
        with pytest.raises(ValueError, match="downsampling only"):
            resample(img, ResampleSpec(2, "average"), "up")

    def test_pixel_size_metadata_scales(self):
        img = RasterImage(random_image(2).data, ("R", "G", "B", "NIR"), pixel_size=2.0)
        up = resample(img, ResampleSpec(4, "bicubic"), "up")
        assert up.pixel_size == pytest.approx(0.5)

    def test_factor_one_is_identity(self):
        img = random_image(4)
        assert resample(img, ResampleSpec(1, "bicubic"), "up") is img


class TestBoxFilter:
    def _oracle(self, band: np.ndarray, k: int) -> np.ndarray:
        """Direct-summation moving average with edge replication."""
        p = k // 2
        padded = np.pad(band, p, mode="edge")
        out = np.zeros_like(band, dtype=np.float64)
        for i in range(band.shape[0]):
            for j in range(band.shape[1]):
                out[i, j] = padded[i : i + k, j : j + k].mean()
        return out

    @pytest.mark.parametrize("k", [1, 3, 5, 7])
    def test_matches_direct_summation(self, k, rng):
        band = rng.uniform(0, SAMPLE_MAX, (13, 17))
        np.testing.assert_allclose(box_filter(band, k), self._oracle(band, k), rtol=1e-12)

    def test_constant_invariant(self):
        band = np.full((9, 9), 777.0)
        np.testing.assert_allclose(box_filter(band, 7), 777.0, rtol=1e-13)

    def test_rejects_even_kernel(self):
        with pytest.raises(ValueError, match="odd"):
            box_filter(np.zeros((8, 8)), 4)

    @settings(max_examples=25, deadline=None)
    @given(
        seed=st.integers(0, 10_000),
        k=st.sampled_from([3, 5, 7, 9]),
        h=st.integers(10, 24),
        w=st.integers(10, 24),
    )
    def test_mean_preserving_range(self, seed, k, h, w):
        band = np.random.default_rng(seed).uniform(0, SAMPLE_MAX, (h, w))
        out = box_filter(band, k)
        assert out.min() >= band.min() - 1e-9
        assert out.max() <= band.max() + 1e-9


class TestNormalization:
    def test_round_trip(self):
        img = random_image(9)
        n = normalize(img)
        assert n.min() >= 0.0 and n.max() <= 1.0
        back = denormalize(n, img)
        np.testing.assert_allclose(back.data, img.data, atol=1e-9)

    def test_denormalize_clamps_overshoot(self):
        img = random_image(10)
        out = denormalize(np.array([[[1.5]], [[-0.25]], [[0.5]], [[1.0]]]), img)
        assert out.data[0, 0, 0] == SAMPLE_MAX
        assert out.data[1, 0, 0] == 0.0

    def test_normalize_rejects_out_of_domain(self):
        img = RasterImage(np.full((1, 4, 4), 9999.0), ("PAN",))
        with pytest.raises(ValueError, match="domain"):
            normalize(img)
