"""Pixel containers, colour conversion, and the optical-density transform.

Intensities are promoted to float64 on load and kept real-valued from then
on; all downstream maths assumes that. Arrays inside the containers are
frozen (non-writeable views) so instances can be shared across threads.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import ChannelError, ImageFormatError, ImageIOError

# ITU-R BT.601 luma weights
_LUMA = np.array([0.299, 0.587, 0.114])


def _frozen(arr: np.ndarray) -> np.ndarray:
    # private copy: freezing a caller's array (or a view of it) in place
    # would either mutate their flags or leave our "immutable" data aliased
    out = np.array(arr, dtype=np.float64, order="C")
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class RasterImage:
    """A width x height x channels block of real-valued intensities.

    ``data`` has shape (height, width, channels) with channels in {1, 2, 3}.
    8-bit producers yield values in [0, 255]; other producers document
    their range.
    """

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim == 2:
            arr = arr[:, :, np.newaxis]
        if arr.ndim != 3 or arr.shape[2] not in (1, 2, 3):
            raise ChannelError(f"expected (h, w, c) with c in {{1,2,3}}, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"image must be at least 1x1, got shape {arr.shape}")
        object.__setattr__(self, "data", _frozen(arr))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    def channel(self, i: int) -> np.ndarray:
        """2-D view of channel ``i``."""
        return self.data[:, :, i]


@dataclass(frozen=True)
class OpticalDensityImage:
    """Per-pixel 3-vector of optical densities (unitless, >= 0)."""

    od: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.od, dtype=np.float64)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise ChannelError(f"expected (h, w, 3) optical densities, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)) or np.any(arr < 0):
            raise ValueError("optical densities must be finite and >= 0")
        object.__setattr__(self, "od", _frozen(arr))

    @property
    def height(self) -> int:
        return self.od.shape[0]

    @property
    def width(self) -> int:
        return self.od.shape[1]

    def pixels(self) -> np.ndarray:
        """Flat (n, 3) view of the OD vectors."""
        return self.od.reshape(-1, 3)


def load_image(path: str) -> RasterImage:
    """Load an 8-bit 1- or 3-channel raster file (PNG required, others as
    Pillow supports them). Intensities come back as float64 in [0, 255]."""
    try:
        with Image.open(path) as img:
            img.load()
            mode = img.mode
            if mode == "P":
                # palette PNGs are 8-bit underneath; expand to RGB
                img = img.convert("RGB")
                mode = "RGB"
            if mode not in ("L", "RGB"):
                raise ImageFormatError(
                    f"{path}: unsupported mode {mode!r} (need 8-bit greyscale or RGB)"
                )
            arr = np.asarray(img, dtype=np.float64)
    except (FileNotFoundError, OSError, UnidentifiedImageError) as exc:
        if isinstance(exc, ImageFormatError):
            raise
        raise ImageIOError(f"cannot read image {path}: {exc}") from exc
    return RasterImage(arr)


def save_greyscale_png(channel: np.ndarray, path: str) -> None:
    """Write a 2-D array of [0, 255] intensities as an 8-bit greyscale PNG."""
    arr = np.asarray(channel, dtype=np.float64)
    if arr.ndim != 2:
        raise ChannelError(f"expected a 2-D channel, got shape {arr.shape}")
    out = np.clip(np.rint(arr), 0, 255).astype(np.uint8)
    Image.fromarray(out, mode="L").save(path, format="PNG")


def to_greyscale(img: RasterImage) -> RasterImage:
    """BT.601 luma: grey = 0.299 R + 0.587 G + 0.114 B."""
    if img.channels != 3:
        raise ChannelError(f"to_greyscale needs 3 channels, got {img.channels}")
    grey = img.data @ _LUMA
    return RasterImage(grey)


def to_optical_density(img: RasterImage, reference_white: float = 255.0) -> OpticalDensityImage:
    """Beer-Lambert transform: od_c = -log10((I_c + 1) / (reference_white + 1)).

    The +1 offset keeps od finite at I = 0; od is 0 at I = reference_white
    and monotone decreasing in intensity.
    """
    if img.channels != 3:
        raise ChannelError(f"to_optical_density needs 3 channels, got {img.channels}")
    if img.data.min() < 0 or img.data.max() > reference_white:
        raise ValueError(f"intensities must lie in [0, {reference_white}]")
    i0 = reference_white + 1.0
    od = -np.log10((img.data + 1.0) / i0)
    # intensities exactly at reference_white give od = -log10(1) = -0.0
    od = np.maximum(od, 0.0)
    return OpticalDensityImage(od)


def od_to_intensity(od: np.ndarray, reference_white: float = 255.0) -> np.ndarray:
    """Inverse of :func:`to_optical_density`: I = (ref + 1) * 10**(-od) - 1."""
    return (reference_white + 1.0) * np.power(10.0, -np.asarray(od, dtype=np.float64)) - 1.0
