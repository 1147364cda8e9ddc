"""Evaluation metrics: per-class IoU, precision/recall/F1, and NDWI baselines.

Pixels whose ground truth is Invalid are excluded everywhere. A class
absent from both prediction and ground truth has undefined IoU and is
skipped by the unweighted mean.
"""

import csv
from typing import NamedTuple

import numpy as np

from .rasters import CLOUD, INVALID, LAND, WATER


class ConfusionCounts(NamedTuple):
    tp: int
    fp: int
    fn: int
    tn: int = 0


# The source tables never define which banded formula is NDWI variant 1 vs 2;
# these assignments (1 = green/NIR, 2 = NIR/SWIR) are assumptions and are
# carried verbatim into any output produced from them.
NDWI_FORMULAS = {1: "(B3-B8)/(B3+B8)", 2: "(B8-B11)/(B8+B11)"}
_NDWI_BANDS = {1: (2, 7), 2: (7, 11)}   # indices into the fixed band order


def iou(pred, gt, label):
    """Intersection over union for one class, or None when undefined."""
    pred = np.asarray(pred)
    gt = np.asarray(gt)
    if pred.shape != gt.shape:
        raise ValueError(f"pred {pred.shape} vs gt {gt.shape} dims differ")
    valid = gt != INVALID
    p = (pred == label) & valid
    g = (gt == label) & valid
    union = int((p | g).sum())
    if union == 0:
        return None
    return int((p & g).sum()) / union


def miou(pred, gt, labels=(LAND, WATER, CLOUD)) -> float:
    """Unweighted mean of the defined per-class IoUs."""
    values = [iou(pred, gt, label) for label in labels]
    defined = [v for v in values if v is not None]
    if not defined:
        raise ValueError("IoU undefined for every class")
    return sum(defined) / len(defined)


def precision_recall_f1(counts: ConfusionCounts):
    """(P, R, F1) with the 0-denominator convention of 0 everywhere."""
    tp, fp, fn = counts.tp, counts.fp, counts.fn
    precision = tp / (tp + fp) if tp + fp > 0 else 0.0
    recall = tp / (tp + fn) if tp + fn > 0 else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return precision, recall, f1


def eval_anomaly_series(pred_flags, gt_flags) -> ConfusionCounts:
    """Image-level confusion over aligned novelty verdicts and truth flags."""
    pred = [bool(v) for v in pred_flags]
    gt = [bool(v) for v in gt_flags]
    if len(pred) != len(gt):
        raise ValueError(f"verdicts ({len(pred)}) and truth ({len(gt)}) differ in length")
    tp = sum(p and g for p, g in zip(pred, gt))
    fp = sum(p and not g for p, g in zip(pred, gt))
    fn = sum(g and not p for p, g in zip(pred, gt))
    tn = len(pred) - tp - fp - fn
    return ConfusionCounts(tp=tp, fp=fp, fn=fn, tn=tn)


def eval_change_masks(pred_mask, gt_mask, valid=None) -> ConfusionCounts:
    """Pixel-level confusion of a predicted change mask against truth."""
    pred = np.asarray(pred_mask, dtype=bool)
    gt = np.asarray(gt_mask, dtype=bool)
    if pred.shape != gt.shape:
        raise ValueError(f"pred {pred.shape} vs gt {gt.shape} dims differ")
    if valid is None:
        valid = np.ones_like(gt)
    pred = pred & valid
    gt = gt & valid
    tp = int((pred & gt).sum())
    fp = int((pred & ~gt).sum())
    fn = int((~pred & gt).sum())
    tn = int(valid.sum()) - tp - fp - fn
    return ConfusionCounts(tp=tp, fp=fp, fn=fn, tn=tn)


def ndwi(image, variant=1) -> np.ndarray:
    """Normalized-difference water index map; 0 where the denominator is 0."""
    if variant not in _NDWI_BANDS:
        raise ValueError(f"unknown NDWI variant {variant}; pick one of {sorted(_NDWI_BANDS)}")
    a_idx, b_idx = _NDWI_BANDS[variant]
    data = image.data
    if data.shape[2] <= max(a_idx, b_idx):
        raise ValueError(
            f"NDWI variant {variant} needs band index {max(a_idx, b_idx)}, "
            f"image has only {data.shape[2]} bands"
        )
    a = data[:, :, a_idx].astype(np.float64)
    b = data[:, :, b_idx].astype(np.float64)
    denom = a + b
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(denom != 0, (a - b) / denom, 0.0)
    return out


def ndwi_water_mask(index_map, threshold=0.0) -> np.ndarray:
    """Water where the index is strictly above the threshold."""
    return np.asarray(index_map) > threshold


def segmentation_metrics(pred, gt) -> dict:
    """Table-1-shaped row: per-class IoU and mIoU, as fractions (or None)."""
    return {
        "iou_water": iou(pred, gt, WATER),
        "iou_land": iou(pred, gt, LAND),
        "iou_cloud": iou(pred, gt, CLOUD),
        "miou": miou(pred, gt),
    }


def write_segmentation_csv(path, rows) -> None:
    """Columns iou_water, iou_land, iou_cloud, miou as percentages (2 dp)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iou_water", "iou_land", "iou_cloud", "miou"])
        for row in rows:
            writer.writerow(
                [
                    "" if row[key] is None else f"{100.0 * row[key]:.2f}"
                    for key in ("iou_water", "iou_land", "iou_cloud", "miou")
                ]
            )


def write_anomaly_csv(path, rows) -> None:
    """Columns precision, recall, f1 as fractions (2 dp), one row per series."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["precision", "recall", "f1"])
        for counts in rows:
            precision, recall, f1 = precision_recall_f1(counts)
            writer.writerow([f"{precision:.2f}", f"{recall:.2f}", f"{f1:.2f}"])


def write_change_csv(path, rows) -> None:
    """Columns precision, recall, f1, iou_water as percentages (2 dp)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["precision", "recall", "f1", "iou_water"])
        for counts in rows:
            precision, recall, f1 = precision_recall_f1(counts)
            denom = counts.tp + counts.fp + counts.fn
            iou_water = counts.tp / denom if denom > 0 else 0.0
            writer.writerow(
                [
                    f"{100.0 * precision:.2f}",
                    f"{100.0 * recall:.2f}",
                    f"{100.0 * f1:.2f}",
                    f"{100.0 * iou_water:.2f}",
                ]
            )
