"""Classification metrics and the experiment matrix.

Metrics: balanced accuracy BAC = (sensitivity + specificity) / 2 and
F1 = 2 * precision * recall / (precision + recall) from a confusion table;
per-patient scores (fraction of a patient's images classified correctly)
and their unweighted mean, the global recognition rate (GRR).

An experiment cell is one (descriptor kind, channel mode, k, distance)
combination evaluated over every fold: build the index on the train side,
classify the test side, compute the metrics per fold, and report the
arithmetic mean over folds (fold means, never pooled confusion counts).

Undefined metrics (a fold whose test set lacks one of the classes) raise;
callers that tolerate them record None, never a silent zero, because a
coerced zero would corrupt best-over-distances maxima.
"""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field

from .descriptors import ChannelMode, DescriptorKind, DescriptorParams
from .distances import CANONICAL_DISTANCE_ORDER, DistanceKind
from .errors import (
    EmptyGroupError,
    EmptyInputError,
    IncompleteTrialError,
    LengthMismatchError,
    UndefinedMetricError,
)
from .retrieval import LabeledSample, build_index, classify, query
from .stains import StainSeparationParams
from .datasets import FoldSplit


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.tn, self.fn) < 0:
            raise ValueError("confusion counts must be nonnegative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


def confusion(preds: list[int], truths: list[int]) -> ConfusionCounts:
    """Standard counts with label 1 as the positive class."""
    if len(preds) != len(truths):
        raise LengthMismatchError(f"{len(preds)} predictions vs {len(truths)} truths")
    if not preds:
        raise EmptyInputError("no predictions to score")
    tp = fp = tn = fn = 0
    for p, t in zip(preds, truths):
        if t == 1:
            tp, fn = (tp + 1, fn) if p == 1 else (tp, fn + 1)
        else:
            tn, fp = (tn + 1, fp) if p == 0 else (tn, fp + 1)
    return ConfusionCounts(tp=tp, fp=fp, tn=tn, fn=fn)


def bac(c: ConfusionCounts) -> float:
    """Balanced accuracy: mean of sensitivity and specificity."""
    if c.tp + c.fn == 0:
        raise UndefinedMetricError("BAC undefined: no positive-class samples")
    if c.tn + c.fp == 0:
        raise UndefinedMetricError("BAC undefined: no negative-class samples")
    sen = c.tp / (c.tp + c.fn)
    spc = c.tn / (c.tn + c.fp)
    return (sen + spc) / 2.0


def f1(c: ConfusionCounts) -> float:
    """F-measure; 0 when there are no true positives but both denominators
    are populated."""
    if c.tp + c.fp == 0:
        raise UndefinedMetricError("F1 undefined: no positive predictions")
    if c.tp + c.fn == 0:
        raise UndefinedMetricError("F1 undefined: no positive-class samples")
    if c.tp == 0:
        return 0.0
    pr = c.tp / (c.tp + c.fp)
    rc = c.tp / (c.tp + c.fn)
    return 2.0 * pr * rc / (pr + rc)


@dataclass(frozen=True)
class PatientResult:
    patient_id: str
    n_images: int
    n_correct: int

    def __post_init__(self):
        if self.n_images < 1 or not 0 <= self.n_correct <= self.n_images:
            raise ValueError(f"bad patient counts {self.n_correct}/{self.n_images}")

    @property
    def score(self) -> float:
        return self.n_correct / self.n_images


def patient_scores(
    preds: list[int], truths: list[int], patient_ids: list[str]
) -> list[PatientResult]:
    if not (len(preds) == len(truths) == len(patient_ids)):
        raise LengthMismatchError("preds, truths and patient_ids must align")
    if not preds:
        raise EmptyInputError("no predictions to score")
    totals: dict[str, int] = defaultdict(int)
    correct: dict[str, int] = defaultdict(int)
    for p, t, pid in zip(preds, truths, patient_ids):
        totals[pid] += 1
        if p == t:
            correct[pid] += 1
    return [
        PatientResult(patient_id=pid, n_images=totals[pid], n_correct=correct[pid])
        for pid in sorted(totals)
    ]


def grr(results: list[PatientResult]) -> float:
    """Global recognition rate: the unweighted mean of patient scores
    (a 10-image patient counts the same as a 1-image patient)."""
    if not results:
        raise EmptyInputError("no patient results")
    return sum(r.score for r in results) / len(results)


# ------------------------------------------------------------ experiments


@dataclass(frozen=True)
class ExperimentConfig:
    """One cell of the experiment matrix."""

    kind: DescriptorKind
    mode: ChannelMode
    k: int
    distance: DistanceKind
    descriptor_params: DescriptorParams = DescriptorParams()
    stain_params: StainSeparationParams = StainSeparationParams()

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")


@dataclass(frozen=True)
class FoldMetrics:
    fold_id: int
    bac: float | None
    f1: float | None
    grr: float | None
    n_train: int
    n_test: int


def _mean_or_none(values: list[float | None]) -> float | None:
    defined = [v for v in values if v is not None]
    return sum(defined) / len(defined) if defined else None


@dataclass(frozen=True)
class ResultRecord:
    """Per-fold and fold-averaged metrics for one experiment cell."""

    kind: DescriptorKind
    mode: ChannelMode
    k: int
    distance: DistanceKind
    folds: tuple[FoldMetrics, ...] = field(default_factory=tuple)

    @property
    def n_folds(self) -> int:
        return len(self.folds)

    @property
    def mean_bac(self) -> float | None:
        return _mean_or_none([f.bac for f in self.folds])

    @property
    def mean_f1(self) -> float | None:
        return _mean_or_none([f.f1 for f in self.folds])

    @property
    def mean_grr(self) -> float | None:
        return _mean_or_none([f.grr for f in self.folds])


def evaluate_fold(
    config: ExperimentConfig,
    train: list[LabeledSample],
    test: list[LabeledSample],
    fold_id: int = 0,
) -> FoldMetrics:
    """Classify one fold's test samples against its training index."""
    index = build_index(train)
    preds = []
    truths = []
    pids = []
    for sample in test:
        neighbors = query(index, sample.descriptor, config.k, config.distance)
        preds.append(classify(neighbors, index))
        truths.append(sample.label)
        pids.append(sample.patient_id)
    counts = confusion(preds, truths)

    def _metric(fn):
        try:
            return fn()
        except UndefinedMetricError:
            return None

    return FoldMetrics(
        fold_id=fold_id,
        bac=_metric(lambda: bac(counts)),
        f1=_metric(lambda: f1(counts)),
        grr=_metric(lambda: grr(patient_scores(preds, truths, pids))),
        n_train=len(train),
        n_test=len(test),
    )


def run_experiment(
    config: ExperimentConfig,
    samples: list[LabeledSample],
    folds: list[FoldSplit],
) -> ResultRecord:
    """Evaluate one experiment cell over every fold.

    ``samples`` carry descriptors of the cell's (kind, mode); each fold
    partitions them by patient id.
    """
    if not folds:
        raise EmptyInputError("need at least one fold")
    fold_metrics = []
    for split in folds:
        train = [s for s in samples if s.patient_id in split.train_patient_ids]
        test = [s for s in samples if s.patient_id in split.test_patient_ids]
        fold_metrics.append(evaluate_fold(config, train, test, fold_id=split.fold_id))
    return ResultRecord(
        kind=config.kind,
        mode=config.mode,
        k=config.k,
        distance=config.distance,
        folds=tuple(fold_metrics),
    )


def best_over_distances(records: list[ResultRecord]) -> ResultRecord:
    """The record with maximal fold-averaged BAC in a group sharing
    (kind, mode, k); ties go to the earlier distance in the canonical
    order. Companion metrics come from the same winning record."""
    if not records:
        raise EmptyGroupError("no records to maximise over")
    keys = {(r.kind, r.mode, r.k) for r in records}
    if len(keys) != 1:
        raise ValueError(f"records mix groups: {sorted((k[0].value, k[1].value, k[2]) for k in keys)}")
    scored = [r for r in records if r.mean_bac is not None]
    if not scored:
        raise UndefinedMetricError("every record in the group has undefined BAC")
    rank = {kind: i for i, kind in enumerate(CANONICAL_DISTANCE_ORDER)}
    return max(scored, key=lambda r: (r.mean_bac, -rank[r.distance]))


def rank_distances(
    records: list[ResultRecord],
) -> dict[DescriptorKind, dict[DistanceKind, float]]:
    """Mean relative ranking of each distance per descriptor.

    Within each (kind, mode, k) trial every distance's fold-averaged BAC is
    divided by the trial maximum, so the best distance scores exactly 1.0;
    the ratios are then averaged over the trials (modes x k) of each
    descriptor. Every trial must contain all six distances.
    """
    trials: dict[tuple, dict[DistanceKind, float]] = defaultdict(dict)
    for r in records:
        if r.mean_bac is None:
            raise UndefinedMetricError(
                f"record ({r.kind.value}, {r.mode.value}, k={r.k}, {r.distance.value}) has undefined BAC"
            )
        key = (r.kind, r.mode, r.k)
        if r.distance in trials[key]:
            raise IncompleteTrialError(
                f"duplicate distance {r.distance.value} in trial {key}"
            )
        trials[key][r.distance] = r.mean_bac

    sums: dict[DescriptorKind, dict[DistanceKind, float]] = defaultdict(lambda: defaultdict(float))
    counts: dict[DescriptorKind, int] = defaultdict(int)
    for (kind, mode, k), by_dist in sorted(
        trials.items(), key=lambda kv: (kv[0][0].value, kv[0][1].value, kv[0][2])
    ):
        missing = [d.value for d in CANONICAL_DISTANCE_ORDER if d not in by_dist]
        if missing:
            raise IncompleteTrialError(
                f"trial ({kind.value}, {mode.value}, k={k}) missing distances {missing}"
            )
        best = max(by_dist.values())
        if best <= 0:
            raise UndefinedMetricError(
                f"trial ({kind.value}, {mode.value}, k={k}) has nonpositive best BAC"
            )
        for d, value in by_dist.items():
            sums[kind][d] += value / best
        counts[kind] += 1

    return {
        kind: {d: sums[kind][d] / counts[kind] for d in CANONICAL_DISTANCE_ORDER}
        for kind in sums
    }
