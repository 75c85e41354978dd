import numpy as np
import pytest

from histocbir.descriptors import ChannelMode, Descriptor, DescriptorKind
from histocbir.distances import DistanceKind
from histocbir.errors import (
    DegenerateQueryError,
    EmptyNeighborListError,
    EmptyTrainingSetError,
    HeterogeneousDescriptorsError,
    KOutOfRangeError,
)
from histocbir.retrieval import LabeledSample, build_index, classify, query

from oracles import exhaustive_knn


def _sample(i, values, label=0, patient=None):
    return LabeledSample(
        sample_id=f"s{i:03d}",
        patient_id=patient or f"p{i:03d}",
        label=label,
        descriptor=Descriptor(kind=DescriptorKind.FELP, mode=ChannelMode.GREYSCALE, values=values),
    )


def _random_samples(rng, n, dim=8, duplicates=0, integers=False):
    samples = []
    for i in range(n):
        if integers:
            values = rng.integers(0, 4, dim).astype(float) + 0.5
        else:
            values = rng.uniform(0.01, 1.0, dim)
        samples.append(_sample(i, values, label=int(rng.integers(0, 2))))
    for j in range(duplicates):
        src = samples[int(rng.integers(0, n))]
        samples.append(
            _sample(n + j, src.descriptor.values.copy(), label=int(rng.integers(0, 2)))
        )
    return samples


class TestBuildIndex:
    def test_single_sample(self, rng):
        index = build_index([_sample(0, rng.uniform(0.1, 1, 4))])
        assert len(index) == 1

    def test_empty_rejected(self):
        with pytest.raises(EmptyTrainingSetError):
            build_index([])

    def test_mixed_lengths_rejected(self, rng):
        with pytest.raises(HeterogeneousDescriptorsError):
            build_index([_sample(0, rng.uniform(0.1, 1, 4)), _sample(1, rng.uniform(0.1, 1, 5))])

    def test_paper_scale_index(self, rng):
        # 70% of the 1995-image 40x magnification subset
        samples = _random_samples(rng, 1365, dim=4)
        assert len(build_index(samples)) == 1365


class TestQuery:
    def test_k1_singleton(self, rng):
        s = _sample(0, rng.uniform(0.1, 1, 4))
        index = build_index([s])
        assert query(index, s.descriptor, 1, DistanceKind.L2)[0][0] == "s000"

    def test_probe_equal_to_indexed_sample(self, rng):
        samples = _random_samples(rng, 20)
        index = build_index(samples)
        got = query(index, samples[7].descriptor, 3, DistanceKind.L2)
        assert got[0] == (samples[7].sample_id, 0.0)

    @pytest.mark.parametrize("kind", list(DistanceKind))
    def test_matches_exhaustive_oracle(self, kind, rng):
        samples = _random_samples(rng, 50, duplicates=5)
        index = build_index(samples)
        probe = Descriptor(
            kind=DescriptorKind.FELP, mode=ChannelMode.GREYSCALE, values=rng.uniform(0.01, 1.0, 8)
        )
        vectors = [s.descriptor.values for s in samples]
        for k in (1, 5, 15):
            got = query(index, probe, k, kind)
            want = exhaustive_knn(vectors, probe.values, k, kind.value)
            assert [nid for nid, _ in got] == [samples[i].sample_id for _, i in want]
            assert np.allclose([d for _, d in got], [d for d, _ in want], rtol=1e-9, atol=1e-12)

    def test_tie_break_by_index_position_on_integer_data(self, rng):
        samples = _random_samples(rng, 30, duplicates=10, integers=True)
        index = build_index(samples)
        probe = Descriptor(
            kind=DescriptorKind.FELP,
            mode=ChannelMode.GREYSCALE,
            values=rng.integers(0, 4, 8).astype(float) + 0.5,
        )
        vectors = [s.descriptor.values for s in samples]
        # integer sums are exact in float64, so cross-vector ties are real
        # ties in both routes and must break by index position identically
        for kind in (DistanceKind.L1, DistanceKind.L2):
            got = query(index, probe, 12, kind)
            want = exhaustive_knn(vectors, probe.values, 12, kind.value)
            assert [nid for nid, _ in got] == [samples[i].sample_id for _, i in want]

    def test_prefix_consistency(self, rng):
        samples = _random_samples(rng, 25, duplicates=5)
        index = build_index(samples)
        probe = samples[3].descriptor
        prev = []
        for k in range(1, len(samples) + 1):
            got = [nid for nid, _ in query(index, probe, k, DistanceKind.L1)]
            assert got[: len(prev)] == prev
            prev = got

    def test_full_ordering_ascending(self, rng):
        samples = _random_samples(rng, 25)
        index = build_index(samples)
        got = query(index, samples[0].descriptor, len(samples), DistanceKind.L2)
        dists = [d for _, d in got]
        assert dists == sorted(dists)

    def test_k_out_of_range(self, rng):
        index = build_index(_random_samples(rng, 5))
        probe = index.samples[0].descriptor
        for bad_k in (0, 6):
            with pytest.raises(KOutOfRangeError):
                query(index, probe, bad_k, DistanceKind.L1)

    def test_undefined_pairs_excluded(self, rng):
        samples = _random_samples(rng, 5)
        samples.append(_sample(99, np.zeros(8)))  # zero vector: undefined for cosine
        index = build_index(samples)
        probe = samples[0].descriptor
        got = query(index, probe, 5, DistanceKind.COSINE)
        assert "s099" not in [nid for nid, _ in got]

    def test_degenerate_query(self, rng):
        samples = [_sample(0, np.zeros(4)), _sample(1, rng.uniform(0.1, 1, 4))]
        index = build_index(samples)
        probe = Descriptor(
            kind=DescriptorKind.FELP, mode=ChannelMode.GREYSCALE, values=rng.uniform(0.1, 1, 4)
        )
        with pytest.raises(DegenerateQueryError):
            query(index, probe, 2, DistanceKind.COSINE)


class TestClassify:
    def test_majority(self, rng):
        samples = [_sample(0, rng.uniform(0.1, 1, 4), label=1),
                   _sample(1, rng.uniform(0.1, 1, 4), label=1),
                   _sample(2, rng.uniform(0.1, 1, 4), label=0)]
        index = build_index(samples)
        neighbors = [("s000", 0.1), ("s001", 0.2), ("s002", 0.3)]
        assert classify(neighbors, index) == 1

    def test_tie_goes_to_nearest(self, rng):
        samples = [_sample(0, rng.uniform(0.1, 1, 4), label=0),
                   _sample(1, rng.uniform(0.1, 1, 4), label=1)]
        index = build_index(samples)
        assert classify([("s000", 0.1), ("s001", 0.2)], index) == 0
        assert classify([("s001", 0.1), ("s000", 0.2)], index) == 1

    def test_vote_recount_oracle(self, rng):
        for _ in range(20):
            n = 15
            samples = _random_samples(rng, n)
            index = build_index(samples)
            neighbors = [(s.sample_id, float(i)) for i, s in enumerate(samples)]
            rng.shuffle(neighbors)
            labels = [index.label_of(nid) for nid, _ in neighbors]
            ones, zeros = sum(labels), len(labels) - sum(labels)
            want = 1 if ones > zeros else 0 if zeros > ones else labels[0]
            assert classify(neighbors, index) == want

    def test_empty_rejected(self, rng):
        index = build_index(_random_samples(rng, 2))
        with pytest.raises(EmptyNeighborListError):
            classify([], index)

    def test_leave_one_in(self, rng):
        samples = _random_samples(rng, 30)
        index = build_index(samples)
        for s in samples[:10]:
            neighbors = query(index, s.descriptor, 1, DistanceKind.L2)
            assert classify(neighbors, index) == s.label
