"""histocbir: histopathology image search built on digital stain separation.

The pipeline: H&E stain-basis estimation and deconvolution, per-channel
texture descriptors (LBP, GIST, ELP, F-ELP) concatenated across greyscale
/ H&E / RGB channel modes, brute-force kNN retrieval under six distance
functions, and a patient-disjoint evaluation protocol (balanced accuracy,
F1, patient scores / global recognition rate, distance ranking).
"""

__version__ = "0.1.0"

from .imaging import (
    OpticalDensityImage,
    RasterImage,
    load_image,
    od_to_intensity,
    to_greyscale,
    to_optical_density,
)
from .stains import (
    GroupSeparationResult,
    StainBasis,
    StainConcentrationImage,
    StainSeparationParams,
    concentrations_to_channels,
    estimate_stain_basis,
    separate_group,
    separate_stains,
)
from .descriptors import (
    ChannelMode,
    Descriptor,
    DescriptorKind,
    DescriptorParams,
    elp_descriptor,
    extract,
    felp_descriptor,
    gist_descriptor,
    lbp_descriptor,
)
from .distances import (
    CANONICAL_DISTANCE_ORDER,
    DistanceKind,
    distance,
    hutchinson_distance,
    pairwise,
)
from .retrieval import LabeledSample, SearchIndex, build_index, classify, query
from .datasets import (
    ArtefactFlag,
    DatasetManifest,
    FoldSplit,
    ManifestRow,
    filter_artefacts,
    ingest_breakhis,
    ingest_idc,
    read_fold_file,
    split_folds,
    write_fold_file,
)
from .evaluation import (
    ConfusionCounts,
    ExperimentConfig,
    FoldMetrics,
    PatientResult,
    ResultRecord,
    bac,
    best_over_distances,
    confusion,
    f1,
    grr,
    patient_scores,
    rank_distances,
    run_experiment,
)
from .fixtures import beer_lambert_image, make_synthetic_fixture, random_he_basis
from .pipeline import RunConfig, RunResult, run_pipeline

__all__ = [
    "__version__",
    # imaging
    "RasterImage", "OpticalDensityImage", "load_image", "to_greyscale",
    "to_optical_density", "od_to_intensity",
    # stains
    "StainBasis", "StainSeparationParams", "StainConcentrationImage",
    "GroupSeparationResult", "estimate_stain_basis", "separate_stains",
    "concentrations_to_channels", "separate_group",
    # descriptors
    "DescriptorKind", "ChannelMode", "Descriptor", "DescriptorParams",
    "lbp_descriptor", "gist_descriptor", "elp_descriptor", "felp_descriptor",
    "extract",
    # distances
    "DistanceKind", "CANONICAL_DISTANCE_ORDER", "distance",
    "hutchinson_distance", "pairwise",
    # retrieval
    "LabeledSample", "SearchIndex", "build_index", "query", "classify",
    # datasets
    "DatasetManifest", "ManifestRow", "FoldSplit", "ArtefactFlag",
    "ingest_breakhis", "ingest_idc", "filter_artefacts", "split_folds",
    "read_fold_file", "write_fold_file",
    # evaluation
    "ConfusionCounts", "PatientResult", "ExperimentConfig", "FoldMetrics",
    "ResultRecord", "confusion", "bac", "f1", "patient_scores", "grr",
    "run_experiment", "best_over_distances", "rank_distances",
    # fixtures / pipeline
    "beer_lambert_image", "random_he_basis", "make_synthetic_fixture",
    "RunConfig", "RunResult", "run_pipeline",
]
