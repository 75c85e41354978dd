import numpy as np
import pytest
from PIL import Image

from histocbir.errors import ChannelError, ImageFormatError, ImageIOError
from histocbir.imaging import (
    RasterImage,
    load_image,
    od_to_intensity,
    to_greyscale,
    to_optical_density,
)


def _write_png(path, array, mode="RGB"):
    Image.fromarray(array, mode=mode).save(path, format="PNG")
    return str(path)


class TestLoadImage:
    def test_breakhis_sized_rgb(self, tmp_path, rng):
        arr = rng.integers(0, 256, (460, 700, 3), dtype=np.uint8)
        img = load_image(_write_png(tmp_path / "a.png", arr))
        assert (img.width, img.height, img.channels) == (700, 460, 3)
        assert img.data.min() >= 0 and img.data.max() <= 255

    def test_idc_sized_patch(self, tmp_path, rng):
        arr = rng.integers(0, 256, (50, 50, 3), dtype=np.uint8)
        img = load_image(_write_png(tmp_path / "b.png", arr))
        assert (img.width, img.height, img.channels) == (50, 50, 3)

    def test_degenerate_1x1_black(self, tmp_path):
        img = load_image(_write_png(tmp_path / "c.png", np.zeros((1, 1, 3), dtype=np.uint8)))
        assert (img.width, img.height, img.channels) == (1, 1, 3)
        assert np.array_equal(img.data.ravel(), [0.0, 0.0, 0.0])

    def test_greyscale_png(self, tmp_path):
        arr = np.arange(16, dtype=np.uint8).reshape(4, 4)
        img = load_image(_write_png(tmp_path / "g.png", arr, mode="L"))
        assert img.channels == 1
        assert np.array_equal(img.channel(0), arr.astype(float))

    def test_missing_file(self, tmp_path):
        with pytest.raises(ImageIOError):
            load_image(str(tmp_path / "nope.png"))

    def test_not_an_image(self, tmp_path):
        path = tmp_path / "junk.png"
        path.write_bytes(b"this is not a png")
        with pytest.raises(ImageIOError):
            load_image(str(path))

    def test_unsupported_depth(self, tmp_path):
        arr = (np.arange(16, dtype=np.uint16) * 4000).reshape(4, 4)
        Image.fromarray(arr).save(tmp_path / "d.png")
        with pytest.raises(ImageFormatError):
            load_image(str(tmp_path / "d.png"))

    def test_unsupported_channels(self, tmp_path, rng):
        arr = rng.integers(0, 256, (4, 4, 4), dtype=np.uint8)
        Image.fromarray(arr, mode="RGBA").save(tmp_path / "e.png")
        with pytest.raises(ImageFormatError):
            load_image(str(tmp_path / "e.png"))

    def test_deterministic(self, tmp_path, rng):
        path = _write_png(tmp_path / "f.png", rng.integers(0, 256, (8, 8, 3), dtype=np.uint8))
        assert np.array_equal(load_image(path).data, load_image(path).data)


class TestGreyscale:
    def test_white_maps_to_white(self):
        img = RasterImage(np.full((2, 2, 3), 255.0))
        assert to_greyscale(img).data.max() == pytest.approx(255.0)

    def test_pure_red(self):
        img = RasterImage(np.dstack([np.full((1, 1), 255.0), np.zeros((1, 1)), np.zeros((1, 1))]))
        assert to_greyscale(img).data[0, 0, 0] == pytest.approx(76.245)

    def test_grey_input_is_fixed_point(self):
        img = RasterImage(np.full((3, 3, 3), 10.0))
        assert to_greyscale(img).data[0, 0, 0] == pytest.approx(10.0, abs=1e-9)

    def test_needs_three_channels(self):
        with pytest.raises(ChannelError):
            to_greyscale(RasterImage(np.zeros((2, 2, 1))))

    def test_bounded_by_channel_extremes(self, rng):
        data = rng.uniform(0, 255, (16, 16, 3))
        grey = to_greyscale(RasterImage(data)).data[:, :, 0]
        assert np.all(grey >= data.min(axis=2) - 1e-9)
        assert np.all(grey <= data.max(axis=2) + 1e-9)


class TestOpticalDensity:
    def test_white_is_zero(self):
        od = to_optical_density(RasterImage(np.full((2, 2, 3), 255.0)))
        assert np.allclose(od.od, 0.0)

    def test_mid_grey(self):
        od = to_optical_density(RasterImage(np.full((1, 1, 3), 127.0)))
        assert np.allclose(od.od, np.log10(2.0))  # -log10(128/256)

    def test_black(self):
        od = to_optical_density(RasterImage(np.zeros((1, 1, 3))))
        assert np.allclose(od.od, np.log10(256.0))
        assert od.od[0, 0, 0] == pytest.approx(2.408, abs=1e-3)

    def test_needs_three_channels(self):
        with pytest.raises(ChannelError):
            to_optical_density(RasterImage(np.zeros((2, 2, 1))))

    def test_round_trip_within_half_level(self):
        levels = np.arange(256, dtype=float)
        img = RasterImage(np.dstack([levels.reshape(16, 16)] * 3))
        od = to_optical_density(img)
        back = od_to_intensity(od.od)
        assert np.abs(back - img.data).max() < 0.5

    def test_monotone_decreasing(self):
        img = RasterImage(np.dstack([np.array([[0.0, 100.0, 200.0, 255.0]])] * 3))
        od = to_optical_density(img).od[0, :, 0]
        assert np.all(np.diff(od) < 0)
