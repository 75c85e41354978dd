"""H&E stain-basis estimation (wedge finding) and per-pixel deconvolution.

The basis is estimated from the data itself: tissue pixels are kept by an
optical-density threshold, projected onto the top-2 principal plane of
their OD vectors, and the angular extremes of the projected cloud (robust
percentiles, not min/max) are mapped back to OD space as the two stain
directions. No calibration or prior knowledge of the stain colours is
needed, which is what makes the approach usable across image sources.

Deconvolution is then a per-pixel nonnegative least-squares against the
2-column basis matrix, solved in closed form with a precomputed
pseudo-inverse and a clamp at zero.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ChannelError, DegenerateWedgeError, InsufficientTissueError
from .imaging import OpticalDensityImage, RasterImage, to_optical_density

# Ruifrok & Johnston's published hematoxylin OD direction; used only to
# decide which wedge extreme gets the H label.
HEMATOXYLIN_REFERENCE = np.array([0.650, 0.704, 0.286]) / np.linalg.norm([0.650, 0.704, 0.286])

_MIN_STAIN_ANGLE_DEG = 1.0


@dataclass(frozen=True)
class StainSeparationParams:
    """Knobs for wedge finding.

    od_threshold: pixels with ||od|| at or below this are background.
    angle_percentile: robust wedge extremes (alpha and 100-alpha percentiles).
    min_tissue_pixels: fewer retained pixels than this is an error.
    """

    od_threshold: float = 0.15
    angle_percentile: float = 1.0
    min_tissue_pixels: int = 100

    def __post_init__(self):
        if not 0 < self.od_threshold < 3:
            raise ValueError(f"od_threshold must be in (0, 3), got {self.od_threshold}")
        if not 0 < self.angle_percentile < 50:
            raise ValueError(f"angle_percentile must be in (0, 50), got {self.angle_percentile}")
        if self.min_tissue_pixels < 1:
            raise ValueError("min_tissue_pixels must be >= 1")


@dataclass(frozen=True)
class StainBasis:
    """Unit OD-space directions for hematoxylin and eosin."""

    h_vector: np.ndarray
    e_vector: np.ndarray

    def __post_init__(self):
        h = np.array(self.h_vector, dtype=np.float64).reshape(3)
        e = np.array(self.e_vector, dtype=np.float64).reshape(3)
        for name, v in (("h_vector", h), ("e_vector", e)):
            if not np.all(np.isfinite(v)) or np.any(v < 0):
                raise ValueError(f"{name} must be finite and nonnegative")
            if abs(np.linalg.norm(v) - 1.0) > 1e-9:
                raise ValueError(f"{name} must be unit length")
        if angle_between_deg(h, e) < _MIN_STAIN_ANGLE_DEG:
            raise DegenerateWedgeError(
                f"stain vectors within {_MIN_STAIN_ANGLE_DEG} degree of each other"
            )
        h.setflags(write=False)
        e.setflags(write=False)
        object.__setattr__(self, "h_vector", h)
        object.__setattr__(self, "e_vector", e)

    def matrix(self) -> np.ndarray:
        """3x2 mixing matrix with H and E as columns."""
        return np.column_stack([self.h_vector, self.e_vector])

    def pinv(self) -> np.ndarray:
        """2x3 pseudo-inverse of the mixing matrix (exists: columns are
        non-collinear by construction)."""
        return np.linalg.pinv(self.matrix())


@dataclass(frozen=True)
class StainConcentrationImage:
    """Per-pixel H and E concentrations, finite and >= 0."""

    h_channel: np.ndarray
    e_channel: np.ndarray

    def __post_init__(self):
        h = np.array(self.h_channel, dtype=np.float64, order="C")
        e = np.array(self.e_channel, dtype=np.float64, order="C")
        if h.ndim != 2 or h.shape != e.shape:
            raise ChannelError(f"channel shapes differ: {h.shape} vs {e.shape}")
        for name, c in (("h_channel", h), ("e_channel", e)):
            if not np.all(np.isfinite(c)) or np.any(c < 0):
                raise ValueError(f"{name} must be finite and >= 0")
        h.setflags(write=False)
        e.setflags(write=False)
        object.__setattr__(self, "h_channel", h)
        object.__setattr__(self, "e_channel", e)

    @property
    def height(self) -> int:
        return self.h_channel.shape[0]

    @property
    def width(self) -> int:
        return self.h_channel.shape[1]


def angle_between_deg(u: np.ndarray, v: np.ndarray) -> float:
    """Angle between two vectors in degrees."""
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0 or nv == 0:
        return 0.0
    c = np.clip(np.dot(u, v) / (nu * nv), -1.0, 1.0)
    return math.degrees(math.acos(c))


def _canonical_sign(v: np.ndarray) -> np.ndarray:
    # eigenvector signs are arbitrary; fix them so results are deterministic
    idx = int(np.argmax(np.abs(v)))
    return -v if v[idx] < 0 else v


def estimate_stain_basis(
    od_pixels: np.ndarray,
    params: StainSeparationParams = StainSeparationParams(),
) -> StainBasis:
    """Wedge finding on a set of OD 3-vectors.

    Steps: threshold out background, find the top-2 principal plane of the
    retained OD vectors, express each pixel as an angle in that plane, take
    the angle_percentile / (100 - angle_percentile) angles as the wedge
    extremes, map them back to OD space (clamping negatives and
    renormalising), and label the extreme closer to the published
    hematoxylin direction as H.

    Deterministic, and independent of pixel order up to floating-point
    roundoff in the covariance accumulation.
    """
    od = np.asarray(od_pixels, dtype=np.float64).reshape(-1, 3)
    norms = np.sqrt((od * od).sum(axis=1))
    tissue = od[norms > params.od_threshold]
    if tissue.shape[0] < params.min_tissue_pixels:
        raise InsufficientTissueError(
            f"{tissue.shape[0]} pixels above OD threshold {params.od_threshold}, "
            f"need {params.min_tissue_pixels}"
        )

    cov = np.cov(tissue.T)
    _, eigvecs = np.linalg.eigh(cov)  # ascending eigenvalues
    e1 = _canonical_sign(eigvecs[:, 2])
    e2 = _canonical_sign(eigvecs[:, 1])
    # orient the leading axis towards the data so projected angles do not wrap
    if tissue.mean(axis=0) @ e1 < 0:
        e1 = -e1

    proj = tissue @ np.column_stack([e1, e2])
    phi = np.arctan2(proj[:, 1], proj[:, 0])
    lo = np.percentile(phi, params.angle_percentile)
    hi = np.percentile(phi, 100.0 - params.angle_percentile)
    if math.degrees(hi - lo) < _MIN_STAIN_ANGLE_DEG:
        raise DegenerateWedgeError(
            f"wedge extremes {math.degrees(hi - lo):.3f} degrees apart; "
            "input looks single-stain or monochrome"
        )

    extremes = []
    for angle in (lo, hi):
        v = math.cos(angle) * e1 + math.sin(angle) * e2
        v = np.maximum(v, 0.0)
        n = np.linalg.norm(v)
        if n == 0:
            raise DegenerateWedgeError("wedge extreme clamps to the zero vector")
        extremes.append(v / n)

    if angle_between_deg(extremes[0], extremes[1]) < _MIN_STAIN_ANGLE_DEG:
        raise DegenerateWedgeError("wedge extremes collapse after clamping to >= 0")

    a0 = angle_between_deg(extremes[0], HEMATOXYLIN_REFERENCE)
    a1 = angle_between_deg(extremes[1], HEMATOXYLIN_REFERENCE)
    h, e = (extremes[0], extremes[1]) if a0 <= a1 else (extremes[1], extremes[0])
    return StainBasis(h_vector=h, e_vector=e)


def separate_stains(od_img: OpticalDensityImage, basis: StainBasis) -> StainConcentrationImage:
    """Least-squares deconvolution of every pixel against the basis,
    negatives clamped to zero."""
    flat = od_img.pixels()
    conc = flat @ basis.pinv().T
    conc = np.maximum(conc, 0.0)
    h = conc[:, 0].reshape(od_img.height, od_img.width)
    e = conc[:, 1].reshape(od_img.height, od_img.width)
    return StainConcentrationImage(h_channel=h, e_channel=e)


def _rescale_channel(values: np.ndarray, p99: float) -> np.ndarray:
    if p99 <= 0.0:
        # identically-zero channels stay zero; any residual positives clamp high
        return np.where(values > 0, 255.0, 0.0)
    return np.minimum(values / p99 * 255.0, 255.0)


def concentrations_to_channels(
    conc: StainConcentrationImage,
    percentiles: tuple[float, float] | None = None,
) -> RasterImage:
    """Rescale each concentration channel to [0, 255] by its 99th percentile
    (values above clamp to 255). ``percentiles`` overrides the per-image
    percentiles, which is how group separation keeps patches comparable."""
    if percentiles is None:
        percentiles = (
            float(np.percentile(conc.h_channel, 99.0)),
            float(np.percentile(conc.e_channel, 99.0)),
        )
    h = _rescale_channel(conc.h_channel, percentiles[0])
    e = _rescale_channel(conc.e_channel, percentiles[1])
    return RasterImage(np.stack([h, e], axis=-1))


@dataclass(frozen=True)
class GroupSeparationResult:
    """Outcome of pooled separation: shared basis, shared rescale
    percentiles, and one 2-channel image per input patch."""

    basis: StainBasis
    percentiles: tuple[float, float]
    channels: list[RasterImage] = field(default_factory=list)


def separate_group(
    patches: list[RasterImage],
    params: StainSeparationParams = StainSeparationParams(),
    reference_white: float = 255.0,
) -> GroupSeparationResult:
    """Estimate one basis from the pooled OD pixels of all patches (e.g. a
    whole slide split into patches) and separate every patch with it.

    Pooling is the point: a single patch may contain only one stain, which
    makes per-patch estimation degenerate, but the pool sees both stains.
    Channel rescaling uses pooled 99th-percentile concentrations so patches
    from the same group remain mutually comparable.
    """
    if not patches:
        raise ValueError("patch list must be non-empty")
    od_images = [to_optical_density(p, reference_white) for p in patches]
    pooled = np.concatenate([od.pixels() for od in od_images], axis=0)
    basis = estimate_stain_basis(pooled, params)

    concs = [separate_stains(od, basis) for od in od_images]
    all_h = np.concatenate([c.h_channel.ravel() for c in concs])
    all_e = np.concatenate([c.e_channel.ravel() for c in concs])
    percentiles = (float(np.percentile(all_h, 99.0)), float(np.percentile(all_e, 99.0)))

    channels = [concentrations_to_channels(c, percentiles) for c in concs]
    return GroupSeparationResult(basis=basis, percentiles=percentiles, channels=channels)
