"""Per-channel texture descriptors and cross-channel concatenation.

Four descriptor families, all histogram- or energy-valued (nonnegative):

* LBP: rotation-invariant uniform local binary patterns on a radius-R
  circle of P interpolated neighbours, pooled over interior pixels.
* GIST: oriented Gabor filter energies pooled on a spatial grid.
* ELP: sign-encoded derivatives of directional line-sum profiles over
  dense local windows, histogrammed per direction.
* F-ELP: the compact frequency variant of ELP; window-averaged low
  frequency magnitudes of the same directional profiles.

An image with N colour channels yields the concatenation of the N
per-channel descriptors, in channel order. With default parameters the
per-channel lengths are 18 (LBP), 512 (GIST), 1024 (ELP) and 32 (F-ELP).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ChannelError, ImageTooSmallError
from .imaging import RasterImage, to_greyscale
from .stains import StainSeparationParams, separate_group

_FELP_FREQ_BINS = 8


class DescriptorKind(Enum):
    ELP = "elp"
    GIST = "gist"
    FELP = "felp"
    LBP = "lbp"

    @property
    def per_channel_length(self) -> int:
        """Feature count per colour channel at default parameters."""
        return {"elp": 1024, "gist": 512, "felp": 32, "lbp": 18}[self.value]


class ChannelMode(Enum):
    GREYSCALE = "grey"
    HE = "he"
    RGB = "rgb"

    @property
    def channels(self) -> int:
        return {"grey": 1, "he": 2, "rgb": 3}[self.value]


@dataclass(frozen=True)
class DescriptorParams:
    """Descriptor hyperparameters: w = 9 projection windows on a stride-3
    grid, a 4x4 GIST grid with a 32-filter bank, and LBP at R = 2, P = 16."""

    elp_window: int = 9
    elp_stride: int = 3
    lbp_radius: int = 2
    lbp_neighbors: int = 16
    gist_grid: int = 4
    gist_scales: int = 4
    gist_orientations: int = 8

    def __post_init__(self):
        if self.elp_window < 3 or self.elp_window % 2 == 0:
            raise ValueError(f"elp_window must be odd and >= 3, got {self.elp_window}")
        if self.elp_stride < 1:
            raise ValueError("elp_stride must be >= 1")
        if self.lbp_radius < 1:
            raise ValueError("lbp_radius must be >= 1")
        if self.lbp_neighbors < 4:
            raise ValueError(f"lbp_neighbors must be >= 4, got {self.lbp_neighbors}")
        if self.gist_grid < 1:
            raise ValueError("gist_grid must be >= 1")
        if self.gist_scales < 1 or self.gist_orientations < 1:
            raise ValueError("gist filter bank needs >= 1 scale and orientation")

    @property
    def gist_filters(self) -> int:
        return self.gist_scales * self.gist_orientations


@dataclass(frozen=True)
class Descriptor:
    """A feature vector tagged with its descriptor kind and channel mode."""

    kind: DescriptorKind
    mode: ChannelMode
    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=np.float64).reshape(-1)
        if vals.size == 0:
            raise ValueError("descriptor must be non-empty")
        if not np.all(np.isfinite(vals)) or np.any(vals < 0):
            raise ValueError("descriptor values must be finite and >= 0")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def __len__(self) -> int:
        return self.values.size


def _as_channel(channel) -> np.ndarray:
    """Accept a 1-channel RasterImage or a bare 2-D array."""
    if isinstance(channel, RasterImage):
        if channel.channels != 1:
            raise ChannelError(f"expected a single channel, got {channel.channels}")
        return channel.channel(0)
    arr = np.asarray(channel, dtype=np.float64)
    if arr.ndim != 2:
        raise ChannelError(f"expected a 2-D channel, got shape {arr.shape}")
    return arr


# ---------------------------------------------------------------- LBP


def _sample_ring_offset(img: np.ndarray, radius: int, dr: float, dc: float) -> np.ndarray:
    """Bilinear sample of img at (i + dr, j + dc) for every interior pixel.

    Uses the lerp form a + t*(b - a) so constant neighbourhoods reproduce
    the constant exactly, and snaps offsets within 1e-9 of an integer so
    cardinal directions are exact shifts (sin/cos at pi multiples are not
    exactly zero in floating point).
    """
    h, w = img.shape
    if abs(dr - round(dr)) < 1e-9:
        dr = float(round(dr))
    if abs(dc - round(dc)) < 1e-9:
        dc = float(round(dc))
    r0 = math.floor(dr)
    c0 = math.floor(dc)
    tr = dr - r0
    tc = dc - c0

    def block(ro: int, co: int) -> np.ndarray:
        return img[radius + ro : h - radius + ro, radius + co : w - radius + co]

    if tr == 0.0 and tc == 0.0:
        return block(r0, c0)
    if tr == 0.0:
        a, b = block(r0, c0), block(r0, c0 + 1)
        return a + tc * (b - a)
    if tc == 0.0:
        a, c = block(r0, c0), block(r0 + 1, c0)
        return a + tr * (c - a)
    a, b = block(r0, c0), block(r0, c0 + 1)
    c, d = block(r0 + 1, c0), block(r0 + 1, c0 + 1)
    top = a + tc * (b - a)
    bot = c + tc * (d - c)
    return top + tr * (bot - top)


def lbp_descriptor(channel, params: DescriptorParams = DescriptorParams()) -> np.ndarray:
    """Rotation-invariant uniform LBP histogram (P + 2 bins, L1-normalised).

    For each interior pixel, P neighbours on the radius-R circle are
    bilinearly sampled and thresholded against the centre (ties count as 1).
    Patterns with at most two circular transitions map to their popcount;
    all others share the final bin.
    """
    img = _as_channel(channel)
    radius, p = params.lbp_radius, params.lbp_neighbors
    h, w = img.shape
    if h < 2 * radius + 1 or w < 2 * radius + 1:
        raise ImageTooSmallError(
            f"LBP with radius {radius} needs at least {2 * radius + 1} pixels per side"
        )
    center = img[radius : h - radius, radius : w - radius]
    bits = np.empty((p,) + center.shape, dtype=bool)
    for k in range(p):
        theta = 2.0 * np.pi * k / p
        sampled = _sample_ring_offset(img, radius, -radius * math.sin(theta), radius * math.cos(theta))
        bits[k] = sampled >= center
    popcount = bits.sum(axis=0)
    transitions = np.zeros(center.shape, dtype=np.int64)
    for k in range(p):
        transitions += bits[k] != bits[(k + 1) % p]
    codes = np.where(transitions <= 2, popcount, p + 1)
    hist = np.bincount(codes.ravel(), minlength=p + 2).astype(np.float64)
    return hist / hist.sum()


# ---------------------------------------------------------------- GIST


@lru_cache(maxsize=16)
def _gabor_bank(shape: tuple[int, int], scales: int, orientations: int) -> np.ndarray:
    """Frequency-domain Gabor transfer functions: polar Gaussians centred on
    (scale frequency, orientation), with the DC bin forced to zero so every
    filter is exactly zero-mean."""
    h, w = shape
    fy = np.fft.fftfreq(h)[:, np.newaxis]
    fx = np.fft.fftfreq(w)[np.newaxis, :]
    fr = np.hypot(fx, fy)
    theta = np.arctan2(fy, fx)
    bank = np.empty((scales * orientations, h, w))
    i = 0
    for s in range(scales):
        f0 = 0.3 / (1.85**s)
        radial = np.exp(-3.5 * (fr / f0 - 1.0) ** 2)
        for o in range(orientations):
            ang = np.pi * o / orientations
            dtheta = np.angle(np.exp(1j * (theta - ang)))
            bank[i] = radial * np.exp(-2.0 * np.pi * dtheta**2)
            bank[i, 0, 0] = 0.0
            i += 1
    bank.setflags(write=False)
    return bank


def gist_descriptor(channel, params: DescriptorParams = DescriptorParams()) -> np.ndarray:
    """Mean Gabor response magnitude per (filter, grid cell), filter-major."""
    img = _as_channel(channel)
    g = params.gist_grid
    h, w = img.shape
    if h < g or w < g:
        raise ImageTooSmallError(f"GIST with a {g}x{g} grid needs at least {g} pixels per side")
    bank = _gabor_bank((h, w), params.gist_scales, params.gist_orientations)
    spectrum = np.fft.fft2(img)
    row_edges = np.linspace(0, h, g + 1).astype(int)
    col_edges = np.linspace(0, w, g + 1).astype(int)
    feats = np.empty(bank.shape[0] * g * g)
    for i in range(bank.shape[0]):
        mag = np.abs(np.fft.ifft2(spectrum * bank[i]))
        for r in range(g):
            for c in range(g):
                cell = mag[row_edges[r] : row_edges[r + 1], col_edges[c] : col_edges[c + 1]]
                feats[i * g * g + r * g + c] = cell.mean()
    return feats


# ------------------------------------------------------------ ELP / F-ELP


def _window_stack(img: np.ndarray, w: int, stride: int) -> np.ndarray:
    if img.shape[0] < w or img.shape[1] < w:
        raise ImageTooSmallError(f"window size {w} exceeds image {img.shape}")
    views = sliding_window_view(img, (w, w))[::stride, ::stride]
    return views.reshape(-1, w, w)


def _directional_profiles(windows: np.ndarray) -> list[np.ndarray]:
    """Length-normalised line profiles of each window along 0, 45, 90 and
    135 degrees.

    Diagonal directions have 2w - 1 lines of varying length; the centre w
    are kept so all four directions produce profiles of identical length,
    and every line sum is divided by its pixel count so that a constant
    window yields constant profiles in all four directions.
    """
    w = windows.shape[-1]
    half = (w - 1) // 2
    p0 = windows.mean(axis=1)
    p90 = windows.mean(axis=2)
    offsets = range(-half, half + 1)
    lengths = np.array([w - abs(o) for o in offsets], dtype=np.float64)
    p45 = np.stack([np.trace(windows, offset=o, axis1=1, axis2=2) for o in offsets], axis=1) / lengths
    flipped = windows[:, :, ::-1]
    p135 = np.stack([np.trace(flipped, offset=o, axis1=1, axis2=2) for o in offsets], axis=1) / lengths
    return [p0, p45, p90, p135]


def _sign_codes(profiles: np.ndarray) -> np.ndarray:
    """First-difference each profile, binarise by sign (>= 0 maps to 1) and
    read the bits MSB-first as an integer code."""
    bits = np.diff(profiles, axis=1) >= 0
    weights = 1 << np.arange(bits.shape[1] - 1, -1, -1)
    return bits @ weights


def elp_descriptor(channel, params: DescriptorParams = DescriptorParams()) -> np.ndarray:
    """Encoded local projections: per direction, a histogram over the sign
    codes of all stride-placed windows, each 2**(w-1)-bin block
    L1-normalised. Default w = 9 gives 4 x 256 = 1024 features."""
    img = _as_channel(channel)
    w = params.elp_window
    windows = _window_stack(img, w, params.elp_stride)
    n_bins = 1 << (w - 1)
    blocks = []
    for profiles in _directional_profiles(windows):
        codes = _sign_codes(profiles)
        hist = np.bincount(codes, minlength=n_bins).astype(np.float64)
        total = hist.sum()
        blocks.append(hist / total if total > 0 else hist)
    return np.concatenate(blocks)


def felp_descriptor(channel, params: DescriptorParams = DescriptorParams()) -> np.ndarray:
    """Frequency ELP: window-averaged DFT magnitudes of the directional
    profiles at frequency bins 1..8 (DC excluded), L2-normalised.
    4 directions x 8 bins = 32 features."""
    img = _as_channel(channel)
    w = params.elp_window
    windows = _window_stack(img, w, params.elp_stride)
    cells = []
    for profiles in _directional_profiles(windows):
        mag = np.abs(np.fft.fft(profiles, axis=1))[:, 1 : _FELP_FREQ_BINS + 1]
        mean = mag.mean(axis=0)
        if mean.size < _FELP_FREQ_BINS:  # short windows expose fewer bins
            mean = np.pad(mean, (0, _FELP_FREQ_BINS - mean.size))
        cells.append(mean)
    feats = np.concatenate(cells)
    norm = np.sqrt((feats * feats).sum())
    return feats / norm if norm > 0 else feats


# ---------------------------------------------------------------- extract

_CHANNEL_DESCRIPTORS = {
    DescriptorKind.ELP: elp_descriptor,
    DescriptorKind.GIST: gist_descriptor,
    DescriptorKind.FELP: felp_descriptor,
    DescriptorKind.LBP: lbp_descriptor,
}


def compute_channel_descriptor(kind: DescriptorKind, channel, params: DescriptorParams) -> np.ndarray:
    return _CHANNEL_DESCRIPTORS[kind](channel, params)


def extract(
    img: RasterImage,
    kind: DescriptorKind,
    mode: ChannelMode,
    params: DescriptorParams = DescriptorParams(),
    stain_params: StainSeparationParams = StainSeparationParams(),
) -> Descriptor:
    """Compute the descriptor of ``kind`` on the channels selected by
    ``mode`` and concatenate in channel order.

    Greyscale and RGB modes need a 3-channel input. HE mode accepts either
    a 3-channel image (stain-separated here, on this image alone) or a
    precomputed 2-channel H&E image — batch pipelines separate whole
    patient groups up front and pass the result in.
    """
    if mode is ChannelMode.HE and img.channels == 2:
        channels = [img.channel(0), img.channel(1)]
    elif mode is ChannelMode.HE:
        separated = separate_group([img], stain_params).channels[0]
        channels = [separated.channel(0), separated.channel(1)]
    elif mode is ChannelMode.GREYSCALE:
        channels = [to_greyscale(img).channel(0)]
    elif mode is ChannelMode.RGB:
        if img.channels != 3:
            raise ChannelError(f"RGB mode needs 3 channels, got {img.channels}")
        channels = [img.channel(i) for i in range(3)]
    else:
        raise ChannelError(f"unknown channel mode {mode!r}")
    fn = _CHANNEL_DESCRIPTORS[kind]
    values = np.concatenate([fn(ch, params) for ch in channels])
    return Descriptor(kind=kind, mode=mode, values=values)
