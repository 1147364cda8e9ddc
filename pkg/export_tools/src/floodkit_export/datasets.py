"""Dataset converters: dataset-native trees in, floodkit file contracts out.

Every converter emits, per scene, a float32 (H, V, 13) data tensor, a uint8
validity mask (non-finite source pixels become invalid and are zeroed in the
data tensor), optionally a class map remapped onto 0=Invalid / 1=Land /
2=Water / 3=Cloud, plus a manifest.json the floodkit CLI consumes directly.
Unknown source label values fail loudly; nothing is remapped silently.

Expected layouts (scenes are .tif/.npy/.npz rasters):

  worldfloods:  root/<split>/S2/<scene>.<ext>       13-band reflectances
                root/<split>/gt/<scene>.<ext>       labels, v1 encoding
                                                    0=invalid 1=land 2=water 3=cloud
                root/<split>/meta.json              optional {scene: timestamp}

  ravaen:       root/<location>/imgs/<timestamp>.<ext>      time series
                root/<location>/changes/<timestamp>.<ext>   change masks for
                                                            post-event frames

  mediaeval:    root/<set>/<timestamp>.<ext>
                root/<set>/labels.csv               columns id,flooding
"""

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from floodkit import tensorfile

# WorldFloods v1 ground truth happens to use the same integer meaning as the
# floodkit encoding; the mapping stays explicit so other sources must state
# theirs.
WORLDFLOODS_LABEL_MAP = {0: 0, 1: 1, 2: 2, 3: 3}

SCENE_SUFFIXES = (".tif", ".tiff", ".npy", ".npz")


@dataclass(frozen=True)
class ConversionJob:
    source_root: Path
    out_dir: Path
    split: str = "train"
    checkpoint: Path | None = None


def _scene_files(directory: Path):
    files = [p for p in sorted(directory.iterdir()) if p.suffix.lower() in SCENE_SUFFIXES]
    if not files:
        raise FileNotFoundError(f"no scene rasters under {directory}")
    return files


def _write_image(out_dir: Path, stem: str, data: np.ndarray):
    """Split a source raster into data tensor + validity mask files."""
    from .readers import read_scene  # noqa: F401  (kept close for doc purposes)

    if data.ndim != 3:
        raise ValueError(f"scene {stem!r}: expected (H, V, bands), got {data.shape}")
    data = data.astype(np.float32)
    valid = np.isfinite(data).all(axis=2)
    data[~valid] = 0.0
    data_name = f"{stem}.imtf"
    tensorfile.write_tensor(out_dir / data_name, data)
    entry = {"data": data_name}
    if not valid.all():
        mask_name = f"{stem}.mask.imtf"
        tensorfile.write_tensor(out_dir / mask_name, valid.astype(np.uint8))
        entry["mask"] = mask_name
    return entry


def remap_labels(raw: np.ndarray, label_map: dict, context: str) -> np.ndarray:
    values = set(np.unique(raw).tolist())
    unknown = values - set(label_map)
    if unknown:
        raise ValueError(
            f"{context}: source label values {sorted(unknown)} are not in the "
            f"documented encoding {sorted(label_map)}; refusing to remap silently"
        )
    out = np.zeros(raw.shape, dtype=np.uint8)
    for src, dst in label_map.items():
        out[raw == src] = dst
    return out


def convert_worldfloods(job: ConversionJob, label_map=None) -> Path:
    """Segmentation scenes + ground truth -> labeled manifest."""
    from .readers import read_scene

    label_map = WORLDFLOODS_LABEL_MAP if label_map is None else label_map
    split_root = job.source_root / job.split
    out = job.out_dir
    out.mkdir(parents=True, exist_ok=True)
    meta_path = split_root / "meta.json"
    meta = json.loads(meta_path.read_text()) if meta_path.exists() else {}
    entries = []
    for i, scene in enumerate(_scene_files(split_root / "S2")):
        stem = scene.stem
        entry = _write_image(out, stem, read_scene(scene))
        entry["id"] = stem
        entry["timestamp"] = str(meta.get(stem, f"{i:04d}"))
        gt_matches = [
            p for p in (split_root / "gt").glob(f"{stem}.*")
            if p.suffix.lower() in SCENE_SUFFIXES
        ]
        if gt_matches:
            raw = read_scene(gt_matches[0])
            if raw.ndim != 2:
                raise ValueError(f"{gt_matches[0]}: label rasters are 2-D")
            labels = remap_labels(raw, label_map, str(gt_matches[0]))
            label_name = f"{stem}.labels.imtf"
            tensorfile.write_tensor(out / label_name, labels)
            entry["labels"] = label_name
        entries.append(entry)
    return _write_manifest(out, entries)


def convert_ravaen(job: ConversionJob) -> Path:
    """One change-detection location -> manifest + change masks + truth flags."""
    from .readers import read_scene

    location = job.source_root / job.split
    out = job.out_dir
    out.mkdir(parents=True, exist_ok=True)
    entries, truth = [], []
    changes_dir = location / "changes"
    for scene in _scene_files(location / "imgs"):
        stem = scene.stem
        entry = _write_image(out, stem, read_scene(scene))
        entry["id"] = stem
        entry["timestamp"] = stem
        entries.append(entry)
        change_matches = (
            [
                p for p in changes_dir.glob(f"{stem}.*")
                if p.suffix.lower() in SCENE_SUFFIXES
            ]
            if changes_dir.exists()
            else []
        )
        anomalous = bool(change_matches)
        if change_matches:
            mask = read_scene(change_matches[0])
            if mask.ndim != 2:
                raise ValueError(f"{change_matches[0]}: change masks are 2-D")
            tensorfile.write_tensor(
                out / f"{stem}.gt_change.imtf", (mask != 0).astype(np.uint8)
            )
        truth.append({"id": stem, "anomalous": anomalous})
    (out / "truth.json").write_text(json.dumps(truth, indent=2) + "\n")
    return _write_manifest(out, entries)


def convert_mediaeval(job: ConversionJob) -> Path:
    """One image-level anomaly set -> manifest + truth flags from labels.csv."""
    from .readers import read_scene

    set_root = job.source_root / job.split
    out = job.out_dir
    out.mkdir(parents=True, exist_ok=True)
    labels_path = set_root / "labels.csv"
    if not labels_path.exists():
        raise FileNotFoundError(f"{set_root}: expected labels.csv with id,flooding")
    flooding = {}
    with open(labels_path, newline="") as fh:
        for row in csv.DictReader(fh):
            flooding[row["id"]] = bool(int(row["flooding"]))
    entries, truth = [], []
    for scene in _scene_files(set_root):
        stem = scene.stem
        if stem not in flooding:
            raise ValueError(f"{labels_path}: no flooding label for scene {stem!r}")
        entry = _write_image(out, stem, read_scene(scene))
        entry["id"] = stem
        entry["timestamp"] = stem
        entries.append(entry)
        truth.append({"id": stem, "anomalous": flooding[stem]})
    (out / "truth.json").write_text(json.dumps(truth, indent=2) + "\n")
    return _write_manifest(out, entries)


CONVERTERS = {
    "worldfloods": convert_worldfloods,
    "ravaen": convert_ravaen,
    "mediaeval": convert_mediaeval,
}


def convert_dataset(kind: str, job: ConversionJob) -> Path:
    if kind not in CONVERTERS:
        raise ValueError(f"unknown dataset kind {kind!r}; pick one of {sorted(CONVERTERS)}")
    return CONVERTERS[kind](job)


def _write_manifest(out: Path, entries) -> Path:
    ordered = [
        {
            key: entry[key]
            for key in ("id", "timestamp", "data", "mask", "labels")
            if key in entry
        }
        for entry in sorted(entries, key=lambda e: e["timestamp"])
    ]
    manifest = out / "manifest.json"
    manifest.write_text(json.dumps(ordered, indent=2) + "\n")
    return manifest
