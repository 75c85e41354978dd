"""End-to-end orchestration: ingest -> separate -> extract -> evaluate ->
report, driven by a declarative run configuration.

Artifacts land in the output directory with fixed names:

* ``manifest.csv``            dataset manifest (post artefact filter)
* ``flagged_artefacts.csv``   removed patches and why (when filtering)
* ``folds/fold_<i>.txt``      the patient splits actually used
* ``descriptors/<kind>_<mode>.jsonl``  one descriptor store per pair
* ``results.csv``             per-fold metrics, one row per experiment cell x fold
* ``report.csv`` / ``report.txt``      best-over-distances summaries per (k, mode, kind)
* ``rank_distances.csv``      mean relative distance ranking per descriptor
* ``failures.csv``            cells or stages that errored (run continues)
* ``run_metadata.json``       config echo, versions, timings

Runs are deterministic: the same config over the same data produces
byte-identical CSV outputs, whatever the parallelism degree.
"""
from __future__ import annotations

import csv
import json
import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import __version__
from .datasets import (
    DatasetManifest,
    FoldSplit,
    ManifestRow,
    filter_artefacts,
    ingest_breakhis,
    ingest_idc,
    split_folds,
    with_fold_column,
    write_fold_file,
)
from .descriptors import ChannelMode, Descriptor, DescriptorKind, DescriptorParams, extract
from .distances import CANONICAL_DISTANCE_ORDER, DistanceKind
from .errors import ConfigError, HistoCbirError
from .evaluation import (
    ExperimentConfig,
    FoldMetrics,
    ResultRecord,
    best_over_distances,
    rank_distances,
    run_experiment,
)
from .fixtures import make_synthetic_fixture
from .imaging import load_image
from .retrieval import LabeledSample
from .stains import StainSeparationParams, separate_group

logger = logging.getLogger(__name__)

THREADS_ENV = "HISTO_CBIR_THREADS"

_KIND_ORDER = {k: i for i, k in enumerate(DescriptorKind)}
_MODE_ORDER = {m: i for i, m in enumerate(ChannelMode)}
_DIST_ORDER = {d: i for i, d in enumerate(CANONICAL_DISTANCE_ORDER)}

RESULT_COLUMNS = ("descriptor", "mode", "k", "distance", "fold", "bac", "f1", "grr")


def _parse_enum(enum_cls, token: str, what: str):
    try:
        return enum_cls(token)
    except ValueError:
        valid = ", ".join(e.value for e in enum_cls)
        raise ConfigError(f"unknown {what} {token!r}; valid: {valid}") from None


def parse_kinds(tokens) -> tuple[DescriptorKind, ...]:
    return tuple(_parse_enum(DescriptorKind, t, "descriptor") for t in tokens)


def parse_modes(tokens) -> tuple[ChannelMode, ...]:
    return tuple(_parse_enum(ChannelMode, t, "channel mode") for t in tokens)


def parse_distances(tokens) -> tuple[DistanceKind, ...]:
    if list(tokens) == ["all"]:
        return tuple(CANONICAL_DISTANCE_ORDER)
    return tuple(_parse_enum(DistanceKind, t, "distance") for t in tokens)


@dataclass(frozen=True)
class RunConfig:
    """Everything a full run needs. ``dataset`` selects the ingestion
    route: breakhis/idc directory trees, an existing manifest CSV, or the
    bundled synthetic fixture (generated under the output directory)."""

    out_dir: str
    dataset: str = "fixture"
    root: str | None = None
    manifest: str | None = None
    kinds: tuple[DescriptorKind, ...] = (DescriptorKind.FELP, DescriptorKind.LBP)
    modes: tuple[ChannelMode, ...] = tuple(ChannelMode)
    ks: tuple[int, ...] = (1, 5, 15)
    distances: tuple[DistanceKind, ...] = tuple(CANONICAL_DISTANCE_ORDER)
    descriptor_params: DescriptorParams = DescriptorParams()
    stain_params: StainSeparationParams = StainSeparationParams()
    filter_artefacts: bool = False
    tau: float = 8.0
    group_by: str = "patient"
    fold_protocol: str = "files"
    fold_files: tuple[str, ...] = ()
    n_folds: int = 5
    train_fraction: float = 0.7
    seed: int = 3
    threads: int | None = None
    permute_labels: bool = False

    def __post_init__(self):
        if self.dataset not in ("breakhis", "idc", "manifest", "fixture"):
            raise ConfigError(
                f"unknown dataset {self.dataset!r}; valid: breakhis, idc, manifest, fixture"
            )
        if self.dataset in ("breakhis", "idc") and not self.root:
            raise ConfigError(f"dataset {self.dataset!r} needs a root directory")
        if self.dataset == "manifest" and not self.manifest:
            raise ConfigError("dataset 'manifest' needs a manifest path")
        if not (self.kinds and self.modes and self.ks and self.distances):
            raise ConfigError("kinds, modes, ks and distances must be non-empty")
        if any(k < 1 for k in self.ks):
            raise ConfigError(f"every k must be >= 1, got {self.ks}")
        if self.group_by not in ("patient", "none"):
            raise ConfigError(f"unknown group_by {self.group_by!r}; valid: patient, none")
        if self.fold_protocol not in ("breakhis_5fold", "idc_fixed", "files"):
            raise ConfigError(
                f"unknown fold protocol {self.fold_protocol!r}; "
                "valid: breakhis_5fold, idc_fixed, files"
            )

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        data = dict(data)
        if "kinds" in data:
            data["kinds"] = parse_kinds(data["kinds"])
        if "modes" in data:
            data["modes"] = parse_modes(data["modes"])
        if "distances" in data:
            data["distances"] = parse_distances(data["distances"])
        if "ks" in data:
            data["ks"] = tuple(int(k) for k in data["ks"])
        if "fold_files" in data:
            data["fold_files"] = tuple(data["fold_files"])
        if "descriptor_params" in data and isinstance(data["descriptor_params"], dict):
            data["descriptor_params"] = DescriptorParams(**data["descriptor_params"])
        if "stain_params" in data and isinstance(data["stain_params"], dict):
            data["stain_params"] = StainSeparationParams(**data["stain_params"])
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(f"bad config: {exc}") from exc

    @classmethod
    def from_json_file(cls, path: str | Path) -> "RunConfig":
        try:
            with open(path, encoding="utf-8") as f:
                data = json.load(f)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(data)

    def echo(self) -> dict:
        d = asdict(self)
        d["kinds"] = [k.value for k in self.kinds]
        d["modes"] = [m.value for m in self.modes]
        d["distances"] = [x.value for x in self.distances]
        return d


def effective_threads(requested: int | None) -> int:
    cap = None
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            cap = max(int(env), 1)
        except ValueError:
            raise ConfigError(f"{THREADS_ENV} must be an integer, got {env!r}") from None
    if requested is None:
        return cap or 1
    t = max(requested, 1)
    return min(t, cap) if cap else t


# ------------------------------------------------------- descriptor stores


def write_descriptor_store(path: str | Path, samples: list[LabeledSample]) -> None:
    """JSON-lines store: one record per image, floats at full round-trip
    precision."""
    with open(path, "w", encoding="utf-8") as f:
        for s in samples:
            rec = {
                "sample_id": s.sample_id,
                "patient_id": s.patient_id,
                "label": s.label,
                "kind": s.descriptor.kind.value,
                "mode": s.descriptor.mode.value,
                "values": [float(v) for v in s.descriptor.values],
            }
            f.write(json.dumps(rec) + "\n")


def read_descriptor_store(path: str | Path) -> list[LabeledSample]:
    samples = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            samples.append(
                LabeledSample(
                    sample_id=rec["sample_id"],
                    patient_id=rec["patient_id"],
                    label=int(rec["label"]),
                    descriptor=Descriptor(
                        kind=DescriptorKind(rec["kind"]),
                        mode=ChannelMode(rec["mode"]),
                        values=rec["values"],
                    ),
                )
            )
    samples.sort(key=lambda s: s.sample_id)
    return samples


# ------------------------------------------------------------- extraction


@dataclass(frozen=True)
class StageFailure:
    stage: str
    subject: str
    error: str


def _group_rows(manifest: DatasetManifest, group_by: str) -> list[tuple[str, list[ManifestRow]]]:
    if group_by == "none":
        return [(r.sample_id, [r]) for r in manifest]
    groups: dict[str, list[ManifestRow]] = {}
    for r in manifest:
        groups.setdefault(r.patient_id, []).append(r)
    return sorted(groups.items())


def extract_descriptors(
    manifest: DatasetManifest,
    kinds: tuple[DescriptorKind, ...],
    modes: tuple[ChannelMode, ...],
    descriptor_params: DescriptorParams = DescriptorParams(),
    stain_params: StainSeparationParams = StainSeparationParams(),
    group_by: str = "patient",
    root: str | Path | None = None,
    threads: int = 1,
) -> tuple[dict[tuple[DescriptorKind, ChannelMode], list[LabeledSample]], list[StageFailure]]:
    """Compute every requested (kind, mode) descriptor for every image.

    HE-mode channels come from pooled stain separation over each group
    (patients stand in for slides), so patches that individually contain
    one stain still separate. Failures are isolated: an unreadable image
    drops that image, a degenerate group drops that group's HE
    descriptors, and everything else proceeds.
    """
    failures: list[StageFailure] = []
    need_he = ChannelMode.HE in modes

    def process_group(item: tuple[str, list[ManifestRow]]):
        group_id, rows = item
        out: dict[tuple[DescriptorKind, ChannelMode], list[LabeledSample]] = {}
        local_failures: list[StageFailure] = []
        images = []
        kept_rows = []
        for r in rows:
            path = Path(root) / r.path if root is not None else Path(r.path)
            try:
                images.append(load_image(str(path)))
                kept_rows.append(r)
            except HistoCbirError as exc:
                local_failures.append(StageFailure("load", r.sample_id, str(exc)))
        if not kept_rows:
            return out, local_failures
        he_images = None
        if need_he:
            try:
                he_images = separate_group(images, stain_params).channels
            except HistoCbirError as exc:
                local_failures.append(StageFailure("separate", group_id, str(exc)))
        for i, r in enumerate(kept_rows):
            for mode in modes:
                if mode is ChannelMode.HE:
                    if he_images is None:
                        continue
                    source = he_images[i]
                else:
                    source = images[i]
                for kind in kinds:
                    try:
                        d = extract(source, kind, mode, descriptor_params, stain_params)
                    except HistoCbirError as exc:
                        local_failures.append(
                            StageFailure("extract", f"{r.sample_id}/{kind.value}/{mode.value}", str(exc))
                        )
                        continue
                    out.setdefault((kind, mode), []).append(
                        LabeledSample(
                            sample_id=r.sample_id,
                            patient_id=r.patient_id,
                            label=r.label,
                            descriptor=d,
                        )
                    )
        return out, local_failures

    groups = _group_rows(manifest, group_by)
    stores: dict[tuple[DescriptorKind, ChannelMode], list[LabeledSample]] = {
        (kind, mode): [] for kind in kinds for mode in modes
    }
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(process_group, groups))
    else:
        results = [process_group(g) for g in groups]
    for out, local_failures in results:
        failures.extend(local_failures)
        for key, samples in out.items():
            stores[key].extend(samples)
    for key in stores:
        stores[key].sort(key=lambda s: s.sample_id)
    return stores, failures


# ------------------------------------------------------------- evaluation


def evaluate_matrix(
    stores: dict[tuple[DescriptorKind, ChannelMode], list[LabeledSample]],
    folds: list[FoldSplit],
    ks: tuple[int, ...],
    distances: tuple[DistanceKind, ...],
    descriptor_params: DescriptorParams = DescriptorParams(),
    stain_params: StainSeparationParams = StainSeparationParams(),
    threads: int = 1,
) -> tuple[list[ResultRecord], list[StageFailure]]:
    """Run every (kind, mode, k, distance) cell over all folds. A failed
    cell is recorded and skipped; the rest of the matrix proceeds."""
    cells = [
        (kind, mode, k, dist)
        for (kind, mode) in sorted(stores, key=lambda km: (_KIND_ORDER[km[0]], _MODE_ORDER[km[1]]))
        for k in sorted(ks)
        for dist in sorted(distances, key=lambda d: _DIST_ORDER[d])
    ]

    def run_cell(cell):
        kind, mode, k, dist = cell
        config = ExperimentConfig(
            kind=kind,
            mode=mode,
            k=k,
            distance=dist,
            descriptor_params=descriptor_params,
            stain_params=stain_params,
        )
        return run_experiment(config, stores[(kind, mode)], folds)

    records: list[ResultRecord] = []
    failures: list[StageFailure] = []

    def guarded(cell):
        try:
            return run_cell(cell), None
        except HistoCbirError as exc:
            kind, mode, k, dist = cell
            return None, StageFailure(
                "evaluate", f"{kind.value}/{mode.value}/k={k}/{dist.value}", str(exc)
            )

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(guarded, cells))
    else:
        outcomes = [guarded(c) for c in cells]
    for record, failure in outcomes:
        if failure is not None:
            failures.append(failure)
        else:
            records.append(record)
    return records, failures


# ---------------------------------------------------------------- outputs


def _fmt(value: float | None) -> str:
    return "" if value is None else repr(value)


def write_results_csv(path: str | Path, records: list[ResultRecord]) -> None:
    rows = []
    for r in sorted(
        records,
        key=lambda r: (_KIND_ORDER[r.kind], _MODE_ORDER[r.mode], r.k, _DIST_ORDER[r.distance]),
    ):
        for fm in sorted(r.folds, key=lambda f: f.fold_id):
            rows.append(
                [
                    r.kind.value,
                    r.mode.value,
                    r.k,
                    r.distance.value,
                    fm.fold_id,
                    _fmt(fm.bac),
                    _fmt(fm.f1),
                    _fmt(fm.grr),
                ]
            )
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(RESULT_COLUMNS)
        writer.writerows(rows)


def read_results_csv(path: str | Path) -> list[ResultRecord]:
    cells: dict[tuple, list[FoldMetrics]] = {}
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        missing = set(RESULT_COLUMNS) - set(reader.fieldnames or [])
        if missing:
            raise ConfigError(f"{path}: results CSV missing columns {sorted(missing)}")
        for rec in reader:
            key = (
                DescriptorKind(rec["descriptor"]),
                ChannelMode(rec["mode"]),
                int(rec["k"]),
                DistanceKind(rec["distance"]),
            )
            cells.setdefault(key, []).append(
                FoldMetrics(
                    fold_id=int(rec["fold"]),
                    bac=float(rec["bac"]) if rec["bac"] else None,
                    f1=float(rec["f1"]) if rec["f1"] else None,
                    grr=float(rec["grr"]) if rec["grr"] else None,
                    n_train=0,
                    n_test=0,
                )
            )
    return [
        ResultRecord(kind=k[0], mode=k[1], k=k[2], distance=k[3], folds=tuple(folds))
        for k, folds in cells.items()
    ]


def summarize_report(records: list[ResultRecord]) -> list[dict]:
    """Best-over-distances summary rows, one per (k, mode, kind)."""
    groups: dict[tuple, list[ResultRecord]] = {}
    for r in records:
        groups.setdefault((r.k, r.mode, r.kind), []).append(r)
    rows = []
    for (k, mode, kind) in sorted(groups, key=lambda g: (g[0], _MODE_ORDER[g[1]], _KIND_ORDER[g[2]])):
        try:
            best = best_over_distances(groups[(k, mode, kind)])
        except HistoCbirError as exc:
            rows.append(
                {
                    "k": k,
                    "mode": mode.value,
                    "descriptor": kind.value,
                    "best_distance": "",
                    "bac": "",
                    "f1": "",
                    "grr": "",
                    "note": str(exc),
                }
            )
            continue
        rows.append(
            {
                "k": k,
                "mode": mode.value,
                "descriptor": kind.value,
                "best_distance": best.distance.value,
                "bac": _fmt(best.mean_bac),
                "f1": _fmt(best.mean_f1),
                "grr": _fmt(best.mean_grr),
                "note": "",
            }
        )
    return rows


def write_report(
    records: list[ResultRecord], csv_path: str | Path, txt_path: str | Path | None = None
) -> list[dict]:
    rows = summarize_report(records)
    with open(csv_path, "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(
            f,
            fieldnames=["k", "mode", "descriptor", "best_distance", "bac", "f1", "grr", "note"],
            lineterminator="\n",
        )
        writer.writeheader()
        writer.writerows(rows)
    if txt_path is not None:
        with open(txt_path, "w", encoding="utf-8") as f:
            f.write(render_report_tables(rows))
    return rows


def render_report_tables(rows: list[dict]) -> str:
    """Human-readable per-k tables (modes down, descriptors across)."""
    out = []
    ks = sorted({r["k"] for r in rows})
    kinds = [k.value for k in DescriptorKind]
    modes = [m.value for m in ChannelMode]
    for k in ks:
        out.append(f"k = {k}  (best over distances; cell: BAC / F1 / GRR [distance])")
        present_kinds = [kd for kd in kinds if any(r["k"] == k and r["descriptor"] == kd for r in rows)]
        header = ["mode".ljust(8)] + [kd.upper().ljust(34) for kd in present_kinds]
        out.append("".join(header))
        for mode in modes:
            line = [mode.ljust(8)]
            for kd in present_kinds:
                match = [r for r in rows if r["k"] == k and r["mode"] == mode and r["descriptor"] == kd]
                if not match or match[0]["best_distance"] == "":
                    line.append("-".ljust(34))
                    continue
                r = match[0]

                def _short(x):
                    return f"{float(x):.4f}" if x else "n/a"

                cell = f"{_short(r['bac'])} / {_short(r['f1'])} / {_short(r['grr'])} [{r['best_distance']}]"
                line.append(cell.ljust(34))
            out.append("".join(line))
        out.append("")
    return "\n".join(out) + "\n"


def write_rank_csv(records: list[ResultRecord], path: str | Path) -> None:
    table = rank_distances(records)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["descriptor", "distance", "mean_relative_rank"])
        for kind in DescriptorKind:
            if kind not in table:
                continue
            for dist in CANONICAL_DISTANCE_ORDER:
                writer.writerow([kind.value, dist.value, repr(table[kind][dist])])


def write_failures_csv(failures: list[StageFailure], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["stage", "subject", "error"])
        for fl in failures:
            writer.writerow([fl.stage, fl.subject, fl.error])


# ---------------------------------------------------------------- the run


@dataclass
class RunResult:
    records: list[ResultRecord]
    failures: list[StageFailure]
    paths: dict[str, str] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.failures


def _resolve_manifest(config: RunConfig) -> tuple[DatasetManifest, tuple[str, ...]]:
    """Manifest plus (for the fixture) generated fold files."""
    if config.dataset == "breakhis":
        return ingest_breakhis(config.root), config.fold_files
    if config.dataset == "idc":
        return ingest_idc(config.root), config.fold_files
    if config.dataset == "manifest":
        return DatasetManifest.read_csv(config.manifest), config.fold_files
    fixture = make_synthetic_fixture(
        Path(config.out_dir) / "fixture",
        seed=config.seed,
        permute_labels=config.permute_labels,
    )
    return DatasetManifest.read_csv(fixture.manifest), tuple(str(p) for p in fixture.fold_files)


def run_pipeline(config: RunConfig) -> RunResult:
    """Execute the configured experiment matrix and write every artifact."""
    t_start = time.perf_counter()
    timings: dict[str, float] = {}
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    threads = effective_threads(config.threads)
    failures: list[StageFailure] = []
    paths: dict[str, str] = {}

    t0 = time.perf_counter()
    manifest, fold_files = _resolve_manifest(config)
    timings["ingest_s"] = time.perf_counter() - t0

    if config.filter_artefacts:
        t0 = time.perf_counter()
        manifest, flagged = filter_artefacts(manifest, tau=config.tau)
        flag_path = out_dir / "flagged_artefacts.csv"
        with open(flag_path, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(["sample_id", "channel_stds", "error"])
            for fl in flagged:
                stds = ";".join(repr(s) for s in fl.channel_stds) if fl.channel_stds else ""
                writer.writerow([fl.sample_id, stds, fl.error or ""])
        paths["flagged_artefacts"] = str(flag_path)
        timings["filter_s"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    protocol = "files" if fold_files else config.fold_protocol
    if protocol == "files" and not fold_files:
        raise ConfigError("fold protocol 'files' needs fold_files (or the fixture dataset)")
    folds = split_folds(
        manifest,
        protocol,
        n_folds=config.n_folds,
        train_fraction=config.train_fraction,
        seed=config.seed,
        fold_files=list(fold_files) if fold_files else None,
    )
    folds_dir = out_dir / "folds"
    folds_dir.mkdir(exist_ok=True)
    for s in folds:
        write_fold_file(s, folds_dir / f"fold_{s.fold_id}.txt")
    paths["folds"] = str(folds_dir)

    manifest_path = out_dir / "manifest.csv"
    with_fold_column(manifest, folds).write_csv(manifest_path)
    paths["manifest"] = str(manifest_path)
    timings["folds_s"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    stores, extract_failures = extract_descriptors(
        manifest,
        config.kinds,
        config.modes,
        config.descriptor_params,
        config.stain_params,
        group_by=config.group_by,
        threads=threads,
    )
    failures.extend(extract_failures)
    desc_dir = out_dir / "descriptors"
    desc_dir.mkdir(exist_ok=True)
    for (kind, mode), samples in sorted(
        stores.items(), key=lambda km: (_KIND_ORDER[km[0][0]], _MODE_ORDER[km[0][1]])
    ):
        write_descriptor_store(desc_dir / f"{kind.value}_{mode.value}.jsonl", samples)
    paths["descriptors"] = str(desc_dir)
    timings["extract_s"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    records, eval_failures = evaluate_matrix(
        stores,
        folds,
        config.ks,
        config.distances,
        config.descriptor_params,
        config.stain_params,
        threads=threads,
    )
    failures.extend(eval_failures)
    results_path = out_dir / "results.csv"
    write_results_csv(results_path, records)
    paths["results"] = str(results_path)
    timings["evaluate_s"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    report_csv = out_dir / "report.csv"
    write_report(records, report_csv, out_dir / "report.txt")
    paths["report"] = str(report_csv)
    if set(config.distances) == set(CANONICAL_DISTANCE_ORDER):
        try:
            rank_path = out_dir / "rank_distances.csv"
            write_rank_csv(records, rank_path)
            paths["rank_distances"] = str(rank_path)
        except HistoCbirError as exc:
            failures.append(StageFailure("rank", "rank_distances", str(exc)))
    else:
        # the relative ranking needs every distance in every trial
        logger.info(
            "skipping distance ranking: run covers %d of %d distances",
            len(set(config.distances)),
            len(CANONICAL_DISTANCE_ORDER),
        )
    timings["report_s"] = time.perf_counter() - t0

    if failures:
        fail_path = out_dir / "failures.csv"
        write_failures_csv(failures, fail_path)
        paths["failures"] = str(fail_path)
        for fl in failures:
            logger.warning("failed %s (%s): %s", fl.subject, fl.stage, fl.error)

    timings["total_s"] = time.perf_counter() - t_start
    metadata = {
        "config": config.echo(),
        "versions": {"histocbir": __version__, "numpy": _numpy_version()},
        "threads": threads,
        "n_samples": len(manifest),
        "n_folds": len(folds),
        "n_records": len(records),
        "n_failures": len(failures),
        "timings": timings,
    }
    meta_path = out_dir / "run_metadata.json"
    with open(meta_path, "w", encoding="utf-8") as f:
        json.dump(metadata, f, indent=2)
        f.write("\n")
    paths["metadata"] = str(meta_path)

    return RunResult(records=records, failures=failures, paths=paths)


def _numpy_version() -> str:
    import numpy

    return numpy.__version__
