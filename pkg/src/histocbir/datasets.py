"""Dataset ingestion, artefact filtering, and patient-disjoint fold protocols.

Two directory layouts are understood:

* BreakHis-style: flat PNGs named
  ``SOB_<B|M>_<subtype>-<patient>-<magnification>-<sequence>.png``;
  only the 40x magnification subset is kept.
* IDC-style: ``<patient>/<0|1>/<patient>_idx5_x<X>_y<Y>_class<0|1>.png``
  patch trees, with the folder and filename class tokens cross-checked.

Manifests are plain CSV (``path,sample_id,patient_id,label,magnification,
fold``), sorted by sample_id so ingestion is order-stable. Fold files are
plain text with ``train:`` / ``test:`` (optionally ``validation:``)
section headers and one patient id per line; splits read from files are
used verbatim. Every produced split is patient-disjoint, which is the one
hard invariant of the whole protocol.
"""
from __future__ import annotations

import csv
import logging
import re
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import (
    EmptyDatasetError,
    HistoCbirError,
    InfeasibleSplitError,
    ManifestParseError,
    UnknownPatientError,
)
from .imaging import load_image

logger = logging.getLogger(__name__)

_BREAKHIS_RE = re.compile(r"^SOB_([BM])_([A-Z]+)-(.+)-(\d+)-(\d+)$")
_IDC_RE = re.compile(r"^(.+)_idx5_x(\d+)_y(\d+)_class([01])$")

MANIFEST_COLUMNS = ("path", "sample_id", "patient_id", "label", "magnification", "fold")


@dataclass(frozen=True)
class ManifestRow:
    path: str
    sample_id: str
    patient_id: str
    label: int
    magnification: int | None = None
    fold: int | None = None


class DatasetManifest:
    """An ordered, validated collection of manifest rows."""

    def __init__(self, rows: list[ManifestRow]):
        rows = sorted(rows, key=lambda r: r.sample_id)
        seen = set()
        for r in rows:
            if r.label not in (0, 1):
                raise ManifestParseError(f"{r.sample_id}: label must be 0 or 1, got {r.label}")
            if r.sample_id in seen:
                raise ManifestParseError(f"duplicate sample_id {r.sample_id!r}")
            seen.add(r.sample_id)
        self.rows = tuple(rows)

    def __len__(self) -> int:
        return len(self.rows)

    def __iter__(self):
        return iter(self.rows)

    @property
    def patients(self) -> list[str]:
        return sorted({r.patient_id for r in self.rows})

    def label_counts(self) -> dict[int, int]:
        counts = {0: 0, 1: 0}
        for r in self.rows:
            counts[r.label] += 1
        return counts

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f)
            writer.writerow(MANIFEST_COLUMNS)
            for r in self.rows:
                writer.writerow(
                    [
                        r.path,
                        r.sample_id,
                        r.patient_id,
                        r.label,
                        "" if r.magnification is None else r.magnification,
                        "" if r.fold is None else r.fold,
                    ]
                )

    @classmethod
    def read_csv(cls, path: str | Path) -> "DatasetManifest":
        rows = []
        with open(path, newline="", encoding="utf-8") as f:
            reader = csv.DictReader(f)
            missing = set(MANIFEST_COLUMNS[:4]) - set(reader.fieldnames or [])
            if missing:
                raise ManifestParseError(f"{path}: missing manifest columns {sorted(missing)}")
            for rec in reader:
                try:
                    rows.append(
                        ManifestRow(
                            path=rec["path"],
                            sample_id=rec["sample_id"],
                            patient_id=rec["patient_id"],
                            label=int(rec["label"]),
                            magnification=int(rec["magnification"]) if rec.get("magnification") else None,
                            fold=int(rec["fold"]) if rec.get("fold") else None,
                        )
                    )
                except (KeyError, ValueError) as exc:
                    raise ManifestParseError(f"{path}: bad row {rec}: {exc}") from exc
        if not rows:
            raise EmptyDatasetError(f"{path}: manifest has no rows")
        return cls(rows)


def parse_breakhis_filename(name: str) -> tuple[int, str, int]:
    """(label, patient_id, magnification) from a BreakHis basename."""
    m = _BREAKHIS_RE.match(Path(name).stem)
    if not m:
        raise ManifestParseError(f"filename {name!r} does not match the BreakHis pattern")
    label = 1 if m.group(1) == "M" else 0
    return label, m.group(3), int(m.group(4))


def ingest_breakhis(root: str | Path, magnification: int = 40) -> DatasetManifest:
    """Manifest of the BreakHis images at the requested magnification.

    Nonconforming filenames are logged and skipped; ingestion continues.
    """
    root = Path(root)
    rows = []
    skipped = 0
    for path in sorted(root.rglob("*.png")):
        try:
            label, patient, mag = parse_breakhis_filename(path.name)
        except ManifestParseError as exc:
            logger.warning("skipping %s: %s", path, exc)
            skipped += 1
            continue
        if mag != magnification:
            continue
        rows.append(
            ManifestRow(
                path=str(path),
                sample_id=path.stem,
                patient_id=patient,
                label=label,
                magnification=mag,
            )
        )
    if not rows:
        raise EmptyDatasetError(
            f"no {magnification}x BreakHis images under {root} ({skipped} unparseable)"
        )
    return DatasetManifest(rows)


def parse_idc_filename(name: str) -> tuple[str, int, int, int]:
    """(patient_id, x, y, label) from an IDC patch basename."""
    m = _IDC_RE.match(Path(name).stem)
    if not m:
        raise ManifestParseError(f"filename {name!r} does not match the IDC pattern")
    return m.group(1), int(m.group(2)), int(m.group(3)), int(m.group(4))


def ingest_idc(root: str | Path) -> DatasetManifest:
    """Manifest of an IDC patch tree. The class folder (0/1) must agree
    with the filename class token; mismatches are logged and skipped."""
    root = Path(root)
    rows = []
    skipped = 0
    for path in sorted(root.rglob("*.png")):
        try:
            patient, _, _, label = parse_idc_filename(path.name)
            folder = path.parent.name
            if folder in ("0", "1") and int(folder) != label:
                raise ManifestParseError(
                    f"{path}: folder class {folder} contradicts filename class {label}"
                )
        except ManifestParseError as exc:
            logger.warning("skipping %s: %s", path, exc)
            skipped += 1
            continue
        rows.append(
            ManifestRow(
                path=str(path),
                sample_id=path.stem,
                patient_id=patient,
                label=label,
            )
        )
    if not rows:
        raise EmptyDatasetError(f"no IDC patches under {root} ({skipped} unparseable)")
    return DatasetManifest(rows)


@dataclass(frozen=True)
class ArtefactFlag:
    """A patch removed by the artefact filter, with the evidence."""

    sample_id: str
    channel_stds: tuple[float, ...] | None = None
    error: str | None = None


def filter_artefacts(
    manifest: DatasetManifest,
    tau: float = 8.0,
    root: str | Path | None = None,
) -> tuple[DatasetManifest, list[ArtefactFlag]]:
    """Drop patches with minimal variation across the whole image: a patch
    is flagged iff every channel's intensity standard deviation is below
    ``tau``. Unreadable files are flagged too, with the error recorded."""
    kept = []
    flagged = []
    for row in manifest:
        path = Path(root) / row.path if root is not None else Path(row.path)
        try:
            img = load_image(str(path))
        except HistoCbirError as exc:
            flagged.append(ArtefactFlag(sample_id=row.sample_id, error=str(exc)))
            continue
        stds = tuple(float(img.channel(i).std()) for i in range(img.channels))
        if all(s < tau for s in stds):
            flagged.append(ArtefactFlag(sample_id=row.sample_id, channel_stds=stds))
        else:
            kept.append(row)
    if not kept:
        raise EmptyDatasetError("artefact filter removed every patch")
    return DatasetManifest(kept), flagged


@dataclass(frozen=True)
class FoldSplit:
    """A patient-disjoint train/test partition (optionally with a held-out
    validation set belonging to neither side)."""

    fold_id: int
    train_patient_ids: frozenset[str]
    test_patient_ids: frozenset[str]
    validation_patient_ids: frozenset[str] = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, "train_patient_ids", frozenset(self.train_patient_ids))
        object.__setattr__(self, "test_patient_ids", frozenset(self.test_patient_ids))
        object.__setattr__(self, "validation_patient_ids", frozenset(self.validation_patient_ids))
        overlap = self.train_patient_ids & self.test_patient_ids
        if overlap:
            raise InfeasibleSplitError(f"patients on both sides of fold {self.fold_id}: {sorted(overlap)}")
        for name, side in (("train", self.train_patient_ids), ("test", self.test_patient_ids)):
            held = side & self.validation_patient_ids
            if held:
                raise InfeasibleSplitError(
                    f"validation patients also in {name} of fold {self.fold_id}: {sorted(held)}"
                )
        if not self.train_patient_ids or not self.test_patient_ids:
            raise InfeasibleSplitError(f"fold {self.fold_id} has an empty side")


def write_fold_file(split: FoldSplit, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write("train:\n")
        for p in sorted(split.train_patient_ids):
            f.write(f"{p}\n")
        f.write("test:\n")
        for p in sorted(split.test_patient_ids):
            f.write(f"{p}\n")
        if split.validation_patient_ids:
            f.write("validation:\n")
            for p in sorted(split.validation_patient_ids):
                f.write(f"{p}\n")


def read_fold_file(path: str | Path, fold_id: int = 0) -> FoldSplit:
    sections: dict[str, list[str]] = {"train": [], "test": [], "validation": []}
    current: list[str] | None = None
    with open(path, encoding="utf-8") as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if line.lower().rstrip(":") in sections and line.endswith(":"):
                current = sections[line.lower().rstrip(":")]
            elif current is None:
                raise ManifestParseError(f"{path}:{lineno}: patient id before any section header")
            else:
                current.append(line)
    if not sections["train"] or not sections["test"]:
        raise ManifestParseError(f"{path}: fold file needs non-empty train: and test: sections")
    return FoldSplit(
        fold_id=fold_id,
        train_patient_ids=frozenset(sections["train"]),
        test_patient_ids=frozenset(sections["test"]),
        validation_patient_ids=frozenset(sections["validation"]),
    )


def split_folds(
    manifest: DatasetManifest,
    protocol: str,
    n_folds: int = 5,
    train_fraction: float = 0.7,
    seed: int = 0,
    fold_files: list[str | Path] | None = None,
    idc_counts: tuple[int, int, int] = (84, 29, 49),
) -> list[FoldSplit]:
    """Produce patient-disjoint folds.

    ``breakhis_5fold``: n_folds independent random splits of the patients
    at ~train_fraction per side. ``idc_fixed``: a single
    train/validation/test patient partition at the 84/29/49 ratio
    (proportional for other patient counts); validation patients sit on
    neither side. ``files``: one split per provided fold file, verbatim.
    """
    patients = manifest.patients
    if protocol == "files":
        if not fold_files:
            raise InfeasibleSplitError("protocol 'files' needs at least one fold file")
        splits = [read_fold_file(path, fold_id=i) for i, path in enumerate(fold_files)]
        known = set(patients)
        for s in splits:
            unknown = (s.train_patient_ids | s.test_patient_ids | s.validation_patient_ids) - known
            if unknown:
                raise UnknownPatientError(
                    f"fold {s.fold_id} references patients not in the manifest: {sorted(unknown)}"
                )
        return splits

    if protocol == "breakhis_5fold":
        if len(patients) < 2:
            raise InfeasibleSplitError("need at least 2 patients for a train/test split")
        splits = []
        for i in range(n_folds):
            rng = np.random.default_rng([seed, i])
            perm = rng.permutation(len(patients))
            n_train = int(round(train_fraction * len(patients)))
            n_train = min(max(n_train, 1), len(patients) - 1)
            train = frozenset(patients[j] for j in perm[:n_train])
            test = frozenset(patients[j] for j in perm[n_train:])
            splits.append(FoldSplit(fold_id=i, train_patient_ids=train, test_patient_ids=test))
        return splits

    if protocol == "idc_fixed":
        total = sum(idc_counts)
        n = len(patients)
        if n == total:
            n_train, n_val, _ = idc_counts
        else:
            n_train = int(round(n * idc_counts[0] / total))
            n_val = int(round(n * idc_counts[1] / total))
            n_train = max(n_train, 1)
            if n_train + n_val >= n:
                n_val = max(n - n_train - 1, 0)
            if n - n_train - n_val < 1:
                raise InfeasibleSplitError(f"cannot carve {idc_counts} ratio out of {n} patients")
        rng = np.random.default_rng(seed)
        perm = rng.permutation(n)
        train = frozenset(patients[j] for j in perm[:n_train])
        val = frozenset(patients[j] for j in perm[n_train : n_train + n_val])
        test = frozenset(patients[j] for j in perm[n_train + n_val :])
        return [
            FoldSplit(
                fold_id=0,
                train_patient_ids=train,
                test_patient_ids=test,
                validation_patient_ids=val,
            )
        ]

    raise InfeasibleSplitError(f"unknown fold protocol {protocol!r}")


def fold_rows(
    manifest: DatasetManifest, split: FoldSplit
) -> tuple[list[ManifestRow], list[ManifestRow]]:
    """Manifest rows on each side of a split, in manifest order."""
    train = [r for r in manifest if r.patient_id in split.train_patient_ids]
    test = [r for r in manifest if r.patient_id in split.test_patient_ids]
    return train, test


def with_fold_column(manifest: DatasetManifest, splits: list[FoldSplit]) -> DatasetManifest:
    """Annotate rows with the id of the first fold whose test side contains
    their patient (purely informational)."""
    test_fold = {}
    for s in splits:
        for p in s.test_patient_ids:
            test_fold.setdefault(p, s.fold_id)
    return DatasetManifest(
        [replace(r, fold=test_fold.get(r.patient_id)) for r in manifest]
    )
