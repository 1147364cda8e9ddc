"""Static renders of class maps, confidence maps, and change overlays."""

import numpy as np
from PIL import Image

from .rasters import CLOUD, INVALID, LAND, WATER

PALETTE = {
    INVALID: (0, 0, 0),
    LAND: (0, 160, 0),
    WATER: (0, 0, 255),
    CLOUD: (255, 255, 0),
}
CHANGE_COLOR = (0, 0, 255)
BACKGROUND_GRAY = (128, 128, 128)

_LUT = np.zeros((4, 3), dtype=np.uint8)
for _label, _rgb in PALETTE.items():
    _LUT[_label] = _rgb


def render_class_map(labels) -> np.ndarray:
    """Label raster -> (H, V, 3) uint8 using the fixed palette."""
    labels = np.asarray(labels)
    if labels.ndim != 2:
        raise ValueError(f"class map must be 2-D, got shape {labels.shape}")
    if labels.min() < 0 or labels.max() > CLOUD:
        bad = labels.max() if labels.max() > CLOUD else labels.min()
        raise ValueError(f"unknown class label {bad}")
    return _LUT[labels]


def render_confidence(confidence, labels, tau) -> np.ndarray:
    """Class colors, washed 50% toward white wherever confidence < tau.

    Invalid pixels stay black regardless of their (zero) confidence.
    """
    if not 0.0 <= tau <= 1.0:
        raise ValueError(f"confidence threshold must lie in [0, 1], got {tau}")
    confidence = np.asarray(confidence)
    labels = np.asarray(labels)
    if confidence.shape != labels.shape:
        raise ValueError(
            f"confidence {confidence.shape} vs class map {labels.shape} dims differ"
        )
    rgb = render_class_map(labels).astype(np.float64)
    low = (confidence < tau) & (labels != INVALID)
    rgb[low] = rgb[low] * 0.5 + 127.5
    return np.rint(rgb).astype(np.uint8)


def render_change_overlay(changed_water) -> np.ndarray:
    """Changed-water pixels in blue on a mid-gray background."""
    mask = np.asarray(changed_water, dtype=bool)
    if mask.ndim != 2:
        raise ValueError(f"mask must be 2-D, got shape {mask.shape}")
    rgb = np.empty(mask.shape + (3,), dtype=np.uint8)
    rgb[:] = BACKGROUND_GRAY
    rgb[mask] = CHANGE_COLOR
    return rgb


def save_png(path, rgb) -> None:
    arr = np.asarray(rgb)
    if arr.ndim != 3 or arr.shape[2] != 3 or arr.dtype != np.uint8:
        raise ValueError("expected an (H, V, 3) uint8 image")
    Image.fromarray(arr, mode="RGB").save(path, format="PNG")
