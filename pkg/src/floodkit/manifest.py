"""Series manifests: the JSON files that name a time series on disk.

A manifest is a JSON array of entries {"id", "timestamp", "data", "mask"?,
"labels"?}; paths are resolved relative to the manifest's directory.
Acquisition order is semantically required, so entries arriving out of
timestamp order are sorted with a warning.
"""

import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .rasters import MultispectralImage, load_class_map, load_image


@dataclass(frozen=True)
class ManifestEntry:
    image_id: str
    timestamp: str
    data_path: Path
    mask_path: Path | None = None
    label_path: Path | None = None


def load_manifest(path) -> list[ManifestEntry]:
    path = Path(path)
    doc = json.loads(path.read_text())
    if not isinstance(doc, list):
        raise ValueError(f"{path}: manifest must be a JSON array of entries")
    base = path.parent
    entries = []
    for i, item in enumerate(doc):
        try:
            entry = ManifestEntry(
                image_id=str(item["id"]),
                timestamp=str(item["timestamp"]),
                data_path=base / item["data"],
                mask_path=base / item["mask"] if item.get("mask") else None,
                label_path=base / item["labels"] if item.get("labels") else None,
            )
        except KeyError as exc:
            raise ValueError(f"{path}: entry {i} is missing field {exc}") from None
        entries.append(entry)
    stamps = [e.timestamp for e in entries]
    if stamps != sorted(stamps):
        warnings.warn(f"{path}: entries out of timestamp order; sorting")
        entries.sort(key=lambda e: e.timestamp)
    return entries


def load_entry_image(entry: ManifestEntry) -> MultispectralImage:
    return load_image(
        entry.data_path,
        entry.mask_path,
        timestamp=entry.timestamp,
        image_id=entry.image_id,
    )


def load_entry_labels(entry: ManifestEntry) -> np.ndarray:
    if entry.label_path is None:
        raise ValueError(f"manifest entry {entry.image_id!r} has no label map")
    return load_class_map(entry.label_path)
