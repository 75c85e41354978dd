"""Synthetic data: Beer-Lambert phantoms and the bundled fixture dataset.

Phantoms invert the optical-density transform, so a phantom built from a
known basis and known concentration fields is ground truth for the whole
separation pipeline. The fixture dataset is a small two-class collection
of such phantoms (one texture family per class, one stain basis per
synthetic patient) with stratified patient-disjoint fold files, sized so
the full descriptor/evaluation matrix runs in seconds.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .datasets import DatasetManifest, FoldSplit, ManifestRow, write_fold_file
from .imaging import RasterImage, od_to_intensity
from .stains import StainBasis, angle_between_deg

# Plausible H&E optical-density directions (Ruifrok & Johnston ballpark),
# used as the centre of the randomised phantom bases.
DEFAULT_H_DIRECTION = np.array([0.650, 0.704, 0.286])
DEFAULT_E_DIRECTION = np.array([0.070, 0.990, 0.110])


def beer_lambert_image(
    h_conc: np.ndarray,
    e_conc: np.ndarray,
    basis: StainBasis,
    reference_white: float = 255.0,
) -> RasterImage:
    """Forward model: intensities of a scene with the given per-pixel stain
    concentrations under the given basis. Float-valued (no quantisation)."""
    h_conc = np.asarray(h_conc, dtype=np.float64)
    e_conc = np.asarray(e_conc, dtype=np.float64)
    od = h_conc[..., np.newaxis] * basis.h_vector + e_conc[..., np.newaxis] * basis.e_vector
    intensities = od_to_intensity(od, reference_white)
    return RasterImage(np.clip(intensities, 0.0, reference_white))


def random_he_basis(
    rng: np.random.Generator,
    jitter: float = 0.08,
    min_angle_deg: float = 20.0,
) -> StainBasis:
    """A randomised but valid H&E basis: the reference directions perturbed
    componentwise, clamped nonnegative, renormalised, and rejected until
    the pair is at least ``min_angle_deg`` apart."""
    for _ in range(100):
        h = np.maximum(DEFAULT_H_DIRECTION + rng.uniform(-jitter, jitter, 3), 0.0)
        e = np.maximum(DEFAULT_E_DIRECTION + rng.uniform(-jitter, jitter, 3), 0.0)
        h = h / np.linalg.norm(h)
        e = e / np.linalg.norm(e)
        if angle_between_deg(h, e) >= min_angle_deg:
            return StainBasis(h_vector=h, e_vector=e)
    raise RuntimeError("could not draw a valid basis pair")  # pragma: no cover


def tissue_like_concentrations(
    size: int, rng: np.random.Generator, pure_fraction: float = 0.15
) -> tuple[np.ndarray, np.ndarray]:
    """Concentration fields resembling stained tissue: a mixed background
    plus near-pure regions of each stain (nuclei-like and stroma-like),
    which is what makes the wedge extremes identifiable."""
    h = rng.uniform(0.3, 1.2, (size, size))
    e = rng.uniform(0.3, 1.2, (size, size))
    n = size * size
    k = int(pure_fraction * n)
    idx = rng.permutation(n)
    pure_h, pure_e = idx[:k], idx[k : 2 * k]
    h.ravel()[pure_h] = rng.uniform(0.8, 1.5, k)
    e.ravel()[pure_h] = rng.uniform(0.0, 0.03, k)
    h.ravel()[pure_e] = rng.uniform(0.0, 0.03, k)
    e.ravel()[pure_e] = rng.uniform(0.8, 1.5, k)
    return h, e


def _smooth_field(size: int, rng: np.random.Generator, fx: int, fy: int) -> np.ndarray:
    """Low-frequency sinusoidal field in roughly [0.2, 0.9]. The frequency
    pair is fixed per call site (phase-only jitter) so the class forms one
    tight descriptor cluster."""
    phase = rng.uniform(0, 2 * np.pi)
    yy, xx = np.mgrid[0:size, 0:size]
    wave = np.sin(2 * np.pi * (fx * xx + fy * yy) / size + phase)
    return 0.55 + 0.35 * wave


def _busy_field(size: int, rng: np.random.Generator) -> np.ndarray:
    """Per-pixel noise field in [0.2, 1.0]."""
    return rng.uniform(0.2, 1.0, (size, size))


def save_image_png(img: RasterImage, path: str | Path) -> None:
    arr = np.clip(np.rint(img.data), 0, 255).astype(np.uint8)
    if arr.shape[2] == 1:
        Image.fromarray(arr[:, :, 0], mode="L").save(path, format="PNG")
    elif arr.shape[2] == 3:
        Image.fromarray(arr, mode="RGB").save(path, format="PNG")
    else:
        raise ValueError("PNG output supports 1 or 3 channels")


@dataclass(frozen=True)
class FixturePaths:
    root: Path
    manifest: Path
    fold_files: tuple[Path, ...]


def make_synthetic_fixture(
    out_dir: str | Path,
    n_patients_per_class: int = 4,
    patches_per_patient: int = 5,
    size: int = 64,
    n_folds: int = 5,
    seed: int = 3,
    permute_labels: bool = False,
) -> FixturePaths:
    """Generate the bundled synthetic dataset under ``out_dir``.

    Two classes of stain-phantom patches (40 by default): class 0 carries
    smooth low-frequency concentration textures, class 1 carries busy
    per-pixel noise textures, so every descriptor family separates them.
    Each synthetic patient plays the role of one slide: its patches share
    one randomised stain basis. Stratified patient-disjoint fold files
    (one test patient per class per fold) are written alongside the
    manifest. ``permute_labels`` shuffles the label column (the
    permutation-null fixture); images and folds stay identical.
    """
    out_dir = Path(out_dir)
    images_dir = out_dir / "images"
    folds_dir = out_dir / "folds"
    images_dir.mkdir(parents=True, exist_ok=True)
    folds_dir.mkdir(parents=True, exist_ok=True)

    rng = np.random.default_rng(seed)
    rows = []
    patients_by_class: dict[int, list[str]] = {0: [], 1: []}
    for cls in (0, 1):
        for p in range(n_patients_per_class):
            patient_id = f"P{cls}{p:02d}"
            patients_by_class[cls].append(patient_id)
            basis = random_he_basis(rng)
            for s in range(patches_per_patient):
                if cls == 0:
                    h_conc = _smooth_field(size, rng, fx=2, fy=1)
                    e_conc = _smooth_field(size, rng, fx=1, fy=2)
                else:
                    h_conc = _busy_field(size, rng)
                    e_conc = _busy_field(size, rng)
                img = beer_lambert_image(h_conc, e_conc, basis)
                sample_id = f"{patient_id}_s{s:02d}"
                path = images_dir / f"{sample_id}.png"
                save_image_png(img, path)
                rows.append(
                    ManifestRow(
                        path=str(path),
                        sample_id=sample_id,
                        patient_id=patient_id,
                        label=cls,
                    )
                )

    if permute_labels:
        rows.sort(key=lambda r: r.sample_id)
        labels = [r.label for r in rows]
        perm = rng.permutation(len(labels))
        rows = [
            ManifestRow(
                path=r.path,
                sample_id=r.sample_id,
                patient_id=r.patient_id,
                label=labels[perm[i]],
            )
            for i, r in enumerate(rows)
        ]

    manifest = DatasetManifest(rows)
    manifest_path = out_dir / "manifest.csv"
    manifest.write_csv(manifest_path)

    fold_files = []
    for i in range(n_folds):
        fold_rng = np.random.default_rng([seed, 1000 + i])
        train: set[str] = set()
        test: set[str] = set()
        for cls in (0, 1):
            order = fold_rng.permutation(len(patients_by_class[cls]))
            ids = [patients_by_class[cls][j] for j in order]
            n_train = max(int(round(0.7 * len(ids))), 1)
            n_train = min(n_train, len(ids) - 1)
            train.update(ids[:n_train])
            test.update(ids[n_train:])
        split = FoldSplit(fold_id=i, train_patient_ids=frozenset(train), test_patient_ids=frozenset(test))
        path = folds_dir / f"fold_{i}.txt"
        write_fold_file(split, path)
        fold_files.append(path)

    return FixturePaths(root=out_dir, manifest=manifest_path, fold_files=tuple(fold_files))
