"""Distance functions between descriptors.

Six kinds: L1, L2, cosine, correlation, chi-squared, and the Hutchinson
(Monge-Kantorovich) transport distance, which for 1-D histograms reduces
to a prefix-sum formula computable in linear time.

Degenerate inputs (zero vector for cosine, constant vector for
correlation, zero-mass histogram for Hutchinson) raise rather than return
a sentinel: a silent 0 or NaN would corrupt nearest-neighbour orderings.

``pairwise`` is the batch form used by the search index. It applies the
same elementwise operations reduced along the rows, which makes its
results bitwise identical to looping ``distance`` over the rows; undefined
pairs come back as NaN for the caller to exclude.
"""
from __future__ import annotations

from enum import Enum

import numpy as np

from .errors import LengthMismatchError, UndefinedDistanceError, ZeroMassError

_CHI2_EPS = 1e-10


class DistanceKind(Enum):
    L1 = "l1"
    L2 = "l2"
    COSINE = "cosine"
    CORRELATION = "correlation"
    CHI_SQUARED = "chi2"
    HUTCHINSON = "hutchinson"


# canonical order for reports and tie-breaking
CANONICAL_DISTANCE_ORDER = (
    DistanceKind.L1,
    DistanceKind.L2,
    DistanceKind.COSINE,
    DistanceKind.CORRELATION,
    DistanceKind.CHI_SQUARED,
    DistanceKind.HUTCHINSON,
)


def _check_pair(p, q) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(p, dtype=np.float64).reshape(-1)
    q = np.asarray(q, dtype=np.float64).reshape(-1)
    if p.size != q.size:
        raise LengthMismatchError(f"vector lengths differ: {p.size} vs {q.size}")
    if p.size == 0:
        raise LengthMismatchError("vectors must be non-empty")
    return p, q


def hutchinson_distance(p, q) -> float:
    """1-D optimal-transport cost between two nonnegative histograms with
    unit bin spacing, after normalising both to unit mass:
    d = sum_i |sum_{j<=i} (p_j - q_j)|. Linear time via prefix sums."""
    p, q = _check_pair(p, q)
    if np.any(p < 0) or np.any(q < 0):
        raise UndefinedDistanceError("Hutchinson distance needs nonnegative histograms")
    sp = p.sum()
    sq = q.sum()
    if sp <= 0 or sq <= 0:
        raise ZeroMassError("Hutchinson distance undefined for zero-mass histograms")
    diff_cdf = np.cumsum(p / sp) - np.cumsum(q / sq)
    return float(np.abs(diff_cdf).sum())


def distance(kind: DistanceKind, p, q) -> float:
    """Distance of the given kind between two equal-length vectors."""
    p, q = _check_pair(p, q)
    if kind is DistanceKind.L1:
        return float(np.abs(p - q).sum())
    if kind is DistanceKind.L2:
        return float(np.sqrt(((p - q) ** 2).sum()))
    if kind is DistanceKind.COSINE:
        np_ = np.sqrt((p * p).sum())
        nq = np.sqrt((q * q).sum())
        if np_ == 0 or nq == 0:
            raise UndefinedDistanceError("cosine distance undefined for a zero vector")
        return float(np.clip(1.0 - (p * q).sum() / (np_ * nq), 0.0, 2.0))
    if kind is DistanceKind.CORRELATION:
        pc = p - p.mean()
        qc = q - q.mean()
        np_ = np.sqrt((pc * pc).sum())
        nq = np.sqrt((qc * qc).sum())
        if np_ == 0 or nq == 0:
            raise UndefinedDistanceError("correlation distance undefined for a constant vector")
        return float(np.clip(1.0 - (pc * qc).sum() / (np_ * nq), 0.0, 2.0))
    if kind is DistanceKind.CHI_SQUARED:
        return float(0.5 * ((p - q) ** 2 / (p + q + _CHI2_EPS)).sum())
    if kind is DistanceKind.HUTCHINSON:
        return hutchinson_distance(p, q)
    raise ValueError(f"unknown distance kind {kind!r}")


def pairwise(kind: DistanceKind, matrix: np.ndarray, probe: np.ndarray) -> np.ndarray:
    """Distances from ``probe`` to every row of ``matrix``.

    Rows whose pairing with the probe is undefined yield NaN. A probe that
    makes every pairing undefined (zero vector for cosine, constant for
    correlation, zero mass for Hutchinson) yields all-NaN.
    """
    m = np.asarray(matrix, dtype=np.float64)
    p = np.asarray(probe, dtype=np.float64).reshape(-1)
    if m.ndim != 2 or m.shape[1] != p.size:
        raise LengthMismatchError(f"matrix columns {m.shape} do not match probe length {p.size}")
    if kind is DistanceKind.L1:
        return np.abs(m - p).sum(axis=1)
    if kind is DistanceKind.L2:
        return np.sqrt(((m - p) ** 2).sum(axis=1))
    if kind is DistanceKind.COSINE:
        nm = np.sqrt((m * m).sum(axis=1))
        np_ = np.sqrt((p * p).sum())
        with np.errstate(divide="ignore", invalid="ignore"):
            d = 1.0 - (m * p).sum(axis=1) / (nm * np_)
        d = np.where((nm == 0) | (np_ == 0), np.nan, d)
        return np.clip(d, 0.0, 2.0)
    if kind is DistanceKind.CORRELATION:
        mc = m - m.mean(axis=1, keepdims=True)
        pc = p - p.mean()
        nm = np.sqrt((mc * mc).sum(axis=1))
        np_ = np.sqrt((pc * pc).sum())
        with np.errstate(divide="ignore", invalid="ignore"):
            d = 1.0 - (mc * pc).sum(axis=1) / (nm * np_)
        d = np.where((nm == 0) | (np_ == 0), np.nan, d)
        return np.clip(d, 0.0, 2.0)
    if kind is DistanceKind.CHI_SQUARED:
        return 0.5 * ((m - p) ** 2 / (m + p + _CHI2_EPS)).sum(axis=1)
    if kind is DistanceKind.HUTCHINSON:
        if np.any(m < 0) or np.any(p < 0):
            raise UndefinedDistanceError("Hutchinson distance needs nonnegative histograms")
        sm = m.sum(axis=1)
        sp = p.sum()
        with np.errstate(divide="ignore", invalid="ignore"):
            cdf_m = np.cumsum(m / sm[:, np.newaxis], axis=1)
        if sp <= 0:
            return np.full(m.shape[0], np.nan)
        cdf_p = np.cumsum(p / sp)
        d = np.abs(cdf_m - cdf_p).sum(axis=1)
        return np.where(sm <= 0, np.nan, d)
    raise ValueError(f"unknown distance kind {kind!r}")
