"""The ``histo-cbir`` command line.

Subcommands mirror the pipeline stages so each can run standalone:
ingest, separate, extract, search, evaluate, rank-distances, report, and
run (the whole matrix from one config). All outputs are UTF-8 CSV/JSON
with documented headers; see the README for formats.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from .datasets import (
    DatasetManifest,
    filter_artefacts,
    ingest_breakhis,
    ingest_idc,
    split_folds,
)
from .descriptors import ChannelMode, DescriptorKind, DescriptorParams, extract
from .errors import ConfigError, HistoCbirError
from .evaluation import rank_distances
from .imaging import load_image, save_greyscale_png
from .pipeline import (
    RunConfig,
    effective_threads,
    evaluate_matrix,
    extract_descriptors,
    parse_distances,
    parse_kinds,
    parse_modes,
    read_descriptor_store,
    read_results_csv,
    render_report_tables,
    run_pipeline,
    summarize_report,
    write_descriptor_store,
    write_rank_csv,
    write_report,
    write_results_csv,
)
from .retrieval import build_index, classify, query
from .stains import StainSeparationParams, separate_group

logger = logging.getLogger("histocbir")


def _stain_params(args) -> StainSeparationParams:
    return StainSeparationParams(
        od_threshold=args.beta,
        angle_percentile=args.alpha,
        min_tissue_pixels=args.min_tissue,
    )


def _add_stain_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--beta", type=float, default=0.15, help="OD tissue threshold")
    p.add_argument("--alpha", type=float, default=1.0, help="wedge angle percentile")
    p.add_argument("--min-tissue", type=int, default=100, help="minimum tissue pixels")


def _add_descriptor_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--elp-window", type=int, default=9)
    p.add_argument("--elp-stride", type=int, default=3)
    p.add_argument("--lbp-radius", type=int, default=2)
    p.add_argument("--lbp-neighbors", type=int, default=16)
    p.add_argument("--gist-grid", type=int, default=4)


def _descriptor_params(args) -> DescriptorParams:
    return DescriptorParams(
        elp_window=args.elp_window,
        elp_stride=args.elp_stride,
        lbp_radius=args.lbp_radius,
        lbp_neighbors=args.lbp_neighbors,
        gist_grid=args.gist_grid,
    )


# ------------------------------------------------------------ subcommands


def cmd_ingest(args) -> int:
    if args.dataset == "breakhis":
        manifest = ingest_breakhis(args.root)
    else:
        manifest = ingest_idc(args.root)
    n_flagged = 0
    if args.filter_artefacts:
        manifest, flagged = filter_artefacts(manifest, tau=args.tau)
        n_flagged = len(flagged)
        if args.flagged_out:
            with open(args.flagged_out, "w", newline="", encoding="utf-8") as f:
                writer = csv.writer(f, lineterminator="\n")
                writer.writerow(["sample_id", "channel_stds", "error"])
                for fl in flagged:
                    stds = ";".join(repr(s) for s in fl.channel_stds) if fl.channel_stds else ""
                    writer.writerow([fl.sample_id, stds, fl.error or ""])
    manifest.write_csv(args.out)
    counts = manifest.label_counts()
    print(
        f"{len(manifest)} samples ({counts[0]} negative, {counts[1]} positive, "
        f"{len(manifest.patients)} patients, {n_flagged} flagged) -> {args.out}"
    )
    return 0


def cmd_separate(args) -> int:
    in_dir = Path(args.in_dir)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    params = _stain_params(args)

    if args.group_by == "patient":
        if not args.manifest:
            raise ConfigError("--group-by patient needs --manifest to supply patient ids")
        manifest = DatasetManifest.read_csv(args.manifest)
        groups: dict[str, list[tuple[str, Path]]] = {}
        for row in manifest:
            # manifest paths may be absolute, cwd-relative, or bare names
            # relative to the input directory
            path = Path(row.path)
            for candidate in (path, in_dir / path, in_dir / path.name):
                if candidate.is_file():
                    path = candidate
                    break
            groups.setdefault(row.patient_id, []).append((row.sample_id, path))
        group_items = sorted(groups.items())
    else:
        files = sorted(in_dir.glob("*.png"))
        if not files:
            raise ConfigError(f"no PNG files in {in_dir}")
        group_items = [(p.stem, [(p.stem, p)]) for p in files]

    sidecar = {}
    for group_id, members in group_items:
        images = [load_image(str(p)) for _, p in members]
        result = separate_group(images, params)
        for (sample_id, _), channels in zip(members, result.channels):
            save_greyscale_png(channels.channel(0), out_dir / f"{sample_id}.h.png")
            save_greyscale_png(channels.channel(1), out_dir / f"{sample_id}.e.png")
        sidecar[group_id] = {
            "h_vector": [float(v) for v in result.basis.h_vector],
            "e_vector": [float(v) for v in result.basis.e_vector],
            "percentiles": list(result.percentiles),
            "samples": [sid for sid, _ in members],
        }
    with open(out_dir / "separation.json", "w", encoding="utf-8") as f:
        json.dump(sidecar, f, indent=2, sort_keys=True)
        f.write("\n")
    print(f"separated {sum(len(m) for _, m in group_items)} images in {len(group_items)} groups -> {out_dir}")
    return 0


def cmd_extract(args) -> int:
    manifest = DatasetManifest.read_csv(args.manifest)
    kind = parse_kinds([args.kind])[0]
    mode = parse_modes([args.mode])[0]
    params = _descriptor_params(args)
    stain_params = _stain_params(args)
    stores, failures = extract_descriptors(
        manifest,
        (kind,),
        (mode,),
        params,
        stain_params,
        group_by=args.group_by,
        root=args.root,
        threads=effective_threads(args.threads),
    )
    samples = stores[(kind, mode)]
    write_descriptor_store(args.out, samples)
    for fl in failures:
        logger.warning("failed %s (%s): %s", fl.subject, fl.stage, fl.error)
    print(f"{len(samples)} descriptors ({kind.value}, {mode.value}) -> {args.out}")
    return 0 if not failures else 1


def cmd_search(args) -> int:
    index_samples = read_descriptor_store(args.index)
    probes = read_descriptor_store(args.probe)
    dist = parse_distances([args.distance])[0]
    index = build_index(index_samples)
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(["probe_id", "neighbor_ids", "predicted_label"])
    for probe in probes:
        neighbors = query(index, probe.descriptor, args.k, dist)
        label = classify(neighbors, index)
        writer.writerow([probe.sample_id, ";".join(nid for nid, _ in neighbors), label])
    return 0


def cmd_evaluate(args) -> int:
    manifest = DatasetManifest.read_csv(args.manifest)
    folds = split_folds(manifest, "files", fold_files=args.folds)
    ks = tuple(int(k) for k in args.k.split(","))
    distances = parse_distances(args.distances.split(","))
    stores = {}
    for path in args.descriptors:
        samples = read_descriptor_store(path)
        if not samples:
            raise ConfigError(f"{path}: empty descriptor store")
        key = (samples[0].descriptor.kind, samples[0].descriptor.mode)
        stores[key] = samples
    records, failures = evaluate_matrix(stores, folds, ks, distances, threads=effective_threads(args.threads))
    write_results_csv(args.out, records)
    for fl in failures:
        logger.warning("failed %s (%s): %s", fl.subject, fl.stage, fl.error)
    print(f"{len(records)} experiment cells -> {args.out}")
    return 0 if not failures else 1


def cmd_rank_distances(args) -> int:
    records = read_results_csv(args.results)
    if args.out:
        write_rank_csv(records, args.out)
        print(f"distance ranking -> {args.out}")
    else:
        table = rank_distances(records)
        writer = csv.writer(sys.stdout, lineterminator="\n")
        writer.writerow(["descriptor", "distance", "mean_relative_rank"])
        for kind in DescriptorKind:
            if kind not in table:
                continue
            for dist, value in table[kind].items():
                writer.writerow([kind.value, dist.value, repr(value)])
    return 0


def cmd_report(args) -> int:
    records = read_results_csv(args.results)
    rows = summarize_report(records)
    if args.out:
        write_report(records, args.out)
        print(f"report -> {args.out}")
    if args.style == "tables":
        sys.stdout.write(render_report_tables(rows))
    return 0


def cmd_run(args) -> int:
    data = {}
    if args.config:
        with open(args.config, encoding="utf-8") as f:
            data = json.load(f)
    overrides = {
        "out_dir": args.out,
        "dataset": args.dataset,
        "root": args.root,
        "manifest": args.manifest,
        "kinds": args.descriptors.split(",") if args.descriptors else None,
        "modes": args.modes.split(",") if args.modes else None,
        "ks": [int(k) for k in args.k.split(",")] if args.k else None,
        "distances": args.distances.split(",") if args.distances else None,
        "threads": args.threads,
        "seed": args.seed,
        "filter_artefacts": args.filter_artefacts or None,
        "tau": args.tau,
        "fold_files": args.folds or None,
        "fold_protocol": args.fold_protocol,
        "permute_labels": args.permute_labels or None,
    }
    for key, value in overrides.items():
        if value is not None:
            data[key] = value
    if "out_dir" not in data or data["out_dir"] is None:
        raise ConfigError("an output directory is required (--out or config out_dir)")
    config = RunConfig.from_dict(data)
    result = run_pipeline(config)
    for name, path in sorted(result.paths.items()):
        print(f"{name}: {path}")
    print(f"{len(result.records)} cells evaluated, {len(result.failures)} failures")
    return 0 if result.ok else 1


# ----------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="histo-cbir",
        description="Histopathology image search: stain separation, descriptors, kNN evaluation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="build a manifest from a dataset directory")
    p.add_argument("--dataset", choices=["breakhis", "idc"], required=True)
    p.add_argument("--root", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--filter-artefacts", action="store_true")
    p.add_argument("--tau", type=float, default=8.0, help="per-channel std threshold")
    p.add_argument("--flagged-out", default=None, help="CSV of removed patches")
    p.set_defaults(fn=cmd_ingest)

    p = sub.add_parser("separate", help="write H&E channel PNGs for a directory of images")
    p.add_argument("--in", dest="in_dir", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--group-by", choices=["patient", "none"], default="none")
    p.add_argument("--manifest", default=None, help="manifest CSV (needed for --group-by patient)")
    _add_stain_args(p)
    p.set_defaults(fn=cmd_separate)

    p = sub.add_parser("extract", help="compute descriptors for every manifest image")
    p.add_argument("--manifest", required=True)
    p.add_argument("--kind", choices=[k.value for k in DescriptorKind], required=True)
    p.add_argument("--mode", choices=[m.value for m in ChannelMode], required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--root", default=None, help="resolve relative manifest paths against this")
    p.add_argument("--group-by", choices=["patient", "none"], default="patient")
    p.add_argument("--threads", type=int, default=None)
    _add_descriptor_args(p)
    _add_stain_args(p)
    p.set_defaults(fn=cmd_extract)

    p = sub.add_parser("search", help="kNN search probes against an indexed store")
    p.add_argument("--index", required=True, help="descriptor store JSONL")
    p.add_argument("--probe", required=True, help="descriptor store JSONL of probes")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--distance", required=True)
    p.set_defaults(fn=cmd_search)

    p = sub.add_parser("evaluate", help="run the kNN matrix over folds and descriptor stores")
    p.add_argument("--manifest", required=True)
    p.add_argument("--descriptors", nargs="+", required=True, help="descriptor store JSONLs")
    p.add_argument("--folds", nargs="+", required=True, help="fold files")
    p.add_argument("--k", default="1,5,15")
    p.add_argument("--distances", default="all")
    p.add_argument("--metrics", default="auto", choices=["auto", "all"])
    p.add_argument("--out", required=True)
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(fn=cmd_evaluate)

    p = sub.add_parser("rank-distances", help="mean relative distance ranking from results")
    p.add_argument("--results", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_rank_distances)

    p = sub.add_parser("report", help="best-over-distances summary tables from results")
    p.add_argument("--results", required=True)
    p.add_argument("--style", default="tables", choices=["tables"])
    p.add_argument("--out", default=None, help="also write the summary CSV here")
    p.set_defaults(fn=cmd_report)

    p = sub.add_parser("run", help="full pipeline from a declarative config")
    p.add_argument("--config", default=None, help="JSON config file")
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--dataset", default=None, choices=["breakhis", "idc", "manifest", "fixture"])
    p.add_argument("--root", default=None)
    p.add_argument("--manifest", default=None)
    p.add_argument("--descriptors", default=None, help="comma list, e.g. felp,lbp")
    p.add_argument("--modes", default=None, help="comma list, e.g. grey,he,rgb")
    p.add_argument("--k", default=None, help="comma list, e.g. 1,5,15")
    p.add_argument("--distances", default=None, help="comma list or 'all'")
    p.add_argument("--folds", nargs="+", default=None, help="fold files (used verbatim)")
    p.add_argument("--fold-protocol", dest="fold_protocol", default=None,
                   choices=["breakhis_5fold", "idc_fixed", "files"])
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--filter-artefacts", action="store_true")
    p.add_argument("--tau", type=float, default=None)
    p.add_argument("--permute-labels", action="store_true")
    p.set_defaults(fn=cmd_run)

    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except HistoCbirError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
