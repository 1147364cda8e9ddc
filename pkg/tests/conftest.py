import json

import numpy as np
import pytest

from floodkit import tensorfile
from floodkit.rasters import CLOUD, LAND, WATER, MultispectralImage


def make_image(data, valid=None, image_id="img", timestamp="2018-01-01"):
    data = np.asarray(data, dtype=np.float32)
    if valid is None:
        valid = np.ones(data.shape[:2], dtype=bool)
    return MultispectralImage(
        image_id=image_id, timestamp=timestamp, data=data, valid_mask=valid
    )


ANCHORS = {LAND: 0.2, WATER: 0.5, CLOUD: 0.8}


def quiet_series(seed, n_quiet=14, height=8, width=8, bands=13, noise=0.02):
    """Quiet frames around a fixed base scene; returns (frames, base, noise)."""
    rng = np.random.default_rng(seed)
    base = rng.uniform(0.1, 0.9, size=(height, width, bands))
    frames = []
    for i in range(n_quiet):
        data = base + rng.normal(0.0, noise, size=base.shape)
        frames.append(make_image(data, image_id=f"f{i:03d}", timestamp=f"2018-01-{i + 1:02d}"))
    return frames, base, noise


def perturbed_frame(base, noise, seed, frac=0.3, sigmas=5.0, index=14):
    """One frame with `frac` of its pixels shifted by `sigmas` noise stds."""
    rng = np.random.default_rng(seed + 10_000)
    data = base + rng.normal(0.0, noise, size=base.shape)
    height, width = base.shape[:2]
    n_shift = int(round(frac * height * width))
    flat = rng.choice(height * width, size=n_shift, replace=False)
    rows, cols = np.unravel_index(flat, (height, width))
    data[rows, cols, :] += sigmas * noise
    return make_image(data, image_id=f"f{index:03d}", timestamp=f"2018-01-{index + 1:02d}")


def flood_series(seed, n_quiet=14, frac=0.3, sigmas=5.0, **kwargs):
    frames, base, noise = quiet_series(seed, n_quiet=n_quiet, **kwargs)
    frames.append(perturbed_frame(base, noise, seed, frac=frac, sigmas=sigmas, index=n_quiet))
    return frames


def three_class_scene(seed=0, height=6, width=9, bands=13, jitter=0.01):
    """Image whose thirds are Land / Water / Cloud with separated spectra."""
    rng = np.random.default_rng(seed)
    anchors = ANCHORS
    labels = np.zeros((height, width), dtype=np.uint8)
    third = width // 3
    labels[:, :third] = LAND
    labels[:, third : 2 * third] = WATER
    labels[:, 2 * third :] = CLOUD
    data = np.empty((height, width, bands), dtype=np.float64)
    for label, anchor in anchors.items():
        where = labels == label
        data[where] = anchor + rng.normal(0.0, jitter, size=(int(where.sum()), bands))
    return make_image(data, image_id=f"scene{seed}", timestamp="2018-02-01"), labels


def write_series_manifest(tmp_path, frames, labels_for=None):
    """Write frames (and optional label maps) as tensors plus manifest.json."""
    entries = []
    for frame in frames:
        data_name = f"{frame.image_id}.imtf"
        tensorfile.write_tensor(tmp_path / data_name, frame.data.astype(np.float32))
        entry = {"id": frame.image_id, "timestamp": frame.timestamp, "data": data_name}
        if not frame.valid_mask.all():
            mask_name = f"{frame.image_id}.mask.imtf"
            tensorfile.write_tensor(
                tmp_path / mask_name, frame.valid_mask.astype(np.uint8)
            )
            entry["mask"] = mask_name
        if labels_for and frame.image_id in labels_for:
            label_name = f"{frame.image_id}.labels.imtf"
            tensorfile.write_tensor(
                tmp_path / label_name, labels_for[frame.image_id].astype(np.uint8)
            )
            entry["labels"] = label_name
        entries.append(entry)
    manifest = tmp_path / "manifest.json"
    manifest.write_text(json.dumps(entries))
    return manifest


def make_flood_corpus(tmp_path, seed=0, height=12, width=12, n_quiet=14, noise=0.02):
    """Self-consistent synthetic corpus: a Land scene whose center floods.

    Returns (series_manifest, train_manifest, flood_id, flood_timestamp,
    flood_region) where flood_region is the boolean mask of injected Water
    pixels (~25% of the frame, shifted by 15 noise sigmas).
    """
    gen = np.random.default_rng(seed)
    bands = 13
    base = ANCHORS[LAND] + gen.normal(0.0, 0.005, size=(height, width, bands))
    frames = []
    for i in range(n_quiet):
        data = base + gen.normal(0.0, noise, size=base.shape)
        frames.append(
            make_image(data, image_id=f"f{i:03d}", timestamp=f"2018-01-{i + 1:02d}")
        )
    region = np.zeros((height, width), dtype=bool)
    region[height // 4 : height // 4 + height // 2, width // 4 : width // 4 + width // 2] = True
    data = base + gen.normal(0.0, noise, size=base.shape)
    data[region] = ANCHORS[WATER] + gen.normal(0.0, noise, size=(int(region.sum()), bands))
    flood_id, flood_ts = f"f{n_quiet:03d}", f"2018-01-{n_quiet + 1:02d}"
    frames.append(make_image(data, image_id=flood_id, timestamp=flood_ts))

    series_dir = tmp_path / "series"
    series_dir.mkdir()
    series_manifest = write_series_manifest(series_dir, frames)

    train_dir = tmp_path / "train"
    train_dir.mkdir()
    scenes, labels_for = [], {}
    for s in range(2):
        image, labels = three_class_scene(seed=100 + s, height=9, width=9)
        image = make_image(image.data, image_id=f"train{s}", timestamp=f"2017-06-{s + 1:02d}")
        scenes.append(image)
        labels_for[image.image_id] = labels
    train_manifest = write_series_manifest(train_dir, scenes, labels_for)
    return series_manifest, train_manifest, flood_id, flood_ts, region


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
