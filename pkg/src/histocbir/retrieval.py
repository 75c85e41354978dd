"""Brute-force kNN search over labelled descriptor collections.

Exact full-scan search: the collections at play are a few thousand
samples, exactness keeps oracle testing trivial, and there is no index
build cost to amortise. Ties are broken by index position, so results are
reproducible for any input ordering.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .descriptors import Descriptor
from .distances import DistanceKind, pairwise
from .errors import (
    DegenerateQueryError,
    EmptyNeighborListError,
    EmptyTrainingSetError,
    HeterogeneousDescriptorsError,
    KOutOfRangeError,
    LengthMismatchError,
)


@dataclass(frozen=True)
class LabeledSample:
    """One retrievable unit: descriptor plus class label and patient id."""

    sample_id: str
    patient_id: str
    label: int
    descriptor: Descriptor

    def __post_init__(self):
        if self.label not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {self.label}")


class SearchIndex:
    """Immutable flat index over samples with uniform descriptors."""

    def __init__(self, samples: list[LabeledSample]):
        if not samples:
            raise EmptyTrainingSetError("cannot build an index from no samples")
        first = samples[0].descriptor
        for s in samples[1:]:
            d = s.descriptor
            if d.kind != first.kind or d.mode != first.mode or len(d) != len(first):
                raise HeterogeneousDescriptorsError(
                    f"sample {s.sample_id}: descriptor ({d.kind.value}, {d.mode.value}, "
                    f"len {len(d)}) does not match ({first.kind.value}, {first.mode.value}, "
                    f"len {len(first)})"
                )
        seen = set()
        for s in samples:
            if s.sample_id in seen:
                raise ValueError(f"duplicate sample_id {s.sample_id!r}")
            seen.add(s.sample_id)
        self._samples = tuple(samples)
        self._matrix = np.stack([s.descriptor.values for s in samples])
        self._matrix.setflags(write=False)
        self._labels = {s.sample_id: s.label for s in samples}
        self.kind = first.kind
        self.mode = first.mode

    def __len__(self) -> int:
        return len(self._samples)

    @property
    def samples(self) -> tuple[LabeledSample, ...]:
        return self._samples

    def label_of(self, sample_id: str) -> int:
        return self._labels[sample_id]


def build_index(samples: list[LabeledSample]) -> SearchIndex:
    return SearchIndex(samples)


def query(
    index: SearchIndex,
    probe: Descriptor,
    k: int,
    dist: DistanceKind,
) -> list[tuple[str, float]]:
    """The k nearest samples to ``probe``, ascending by distance, ties
    broken by earlier index position.

    Samples whose pairing with the probe is undefined are excluded; if
    that leaves fewer than k candidates the query is degenerate.
    """
    n = len(index)
    if not 1 <= k <= n:
        raise KOutOfRangeError(f"k={k} outside [1, {n}]")
    if len(probe) != index._matrix.shape[1]:
        raise LengthMismatchError(
            f"probe length {len(probe)} does not match index length {index._matrix.shape[1]}"
        )
    dists = pairwise(dist, index._matrix, probe.values)
    valid = ~np.isnan(dists)
    if valid.sum() < k:
        raise DegenerateQueryError(
            f"only {int(valid.sum())} of {n} pairings defined, need k={k}"
        )
    order = np.argsort(np.where(valid, dists, np.inf), kind="stable")[:k]
    return [(index.samples[i].sample_id, float(dists[i])) for i in order]


def classify(neighbors: list[tuple[str, float]], index: SearchIndex) -> int:
    """Majority vote over neighbour labels; a tied vote falls back to the
    label of the single nearest neighbour."""
    if not neighbors:
        raise EmptyNeighborListError("cannot classify from an empty neighbour list")
    labels = [index.label_of(sample_id) for sample_id, _ in neighbors]
    ones = sum(labels)
    zeros = len(labels) - ones
    if ones > zeros:
        return 1
    if zeros > ones:
        return 0
    return labels[0]
