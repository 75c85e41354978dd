"""Brute-force kNN retrieval over a labelled descriptor collection.

Generates the synthetic fixture dataset, extracts LBP descriptors on the
H&E channels, indexes the training side of one patient-disjoint fold, and
retrieves neighbours for a few test patches.
"""
import tempfile
from pathlib import Path

from histocbir import (
    ChannelMode,
    DescriptorKind,
    DistanceKind,
    DatasetManifest,
    build_index,
    classify,
    make_synthetic_fixture,
    query,
    read_fold_file,
)
from histocbir.pipeline import extract_descriptors

with tempfile.TemporaryDirectory() as td:
    fixture = make_synthetic_fixture(Path(td))
    manifest = DatasetManifest.read_csv(fixture.manifest)
    split = read_fold_file(fixture.fold_files[0])

    stores, failures = extract_descriptors(
        manifest, (DescriptorKind.LBP,), (ChannelMode.HE,), group_by="patient"
    )
    assert not failures
    samples = stores[(DescriptorKind.LBP, ChannelMode.HE)]

    train = [s for s in samples if s.patient_id in split.train_patient_ids]
    test = [s for s in samples if s.patient_id in split.test_patient_ids]
    index = build_index(train)
    print(f"index: {len(index)} training patches; querying {len(test)} held-out patches\n")

    correct = 0
    for sample in test:
        neighbors = query(index, sample.descriptor, k=5, dist=DistanceKind.CHI_SQUARED)
        predicted = classify(neighbors, index)
        correct += predicted == sample.label
        ids = ", ".join(nid for nid, _ in neighbors[:3])
        print(
            f"{sample.sample_id} (label {sample.label}) -> predicted {predicted}; "
            f"nearest: {ids}"
        )
    print(f"\naccuracy on this fold: {correct}/{len(test)}")
