"""Final stage: fold change masks and class maps into a flood call.

The reported percentage is the share of valid pixels that both changed and
were labeled Water (the "new water" reading); the denominator of all valid
pixels keeps the figure stable even when very few pixels changed.
"""

from dataclasses import dataclass

import numpy as np

from .rasters import INVALID, WATER

FLOODING = "Flooding"
NO_FLOODING = "NoFlooding"
DEFAULT_DECISION_THRESHOLD = 1.0   # percent of valid pixels


@dataclass(frozen=True)
class FrameRecord:
    image_id: str
    timestamp: str
    new_water_percentage: float
    decision: str
    water_change: np.ndarray | None = None   # (H, V) bool


@dataclass(frozen=True)
class FloodReport:
    records: tuple
    flood_onset: str | None
    extent: np.ndarray | None

    def to_dict(self) -> dict:
        return {
            "records": [
                {
                    "id": r.image_id,
                    "timestamp": r.timestamp,
                    "new_water_percentage": r.new_water_percentage,
                    "decision": r.decision,
                }
                for r in self.records
            ],
            "flood_onset": self.flood_onset,
        }


def water_change_mask(change, classes) -> np.ndarray:
    """Changed pixels labeled Water (always a subset of the change mask)."""
    change = np.asarray(change, dtype=bool)
    classes = np.asarray(classes)
    if change.shape != classes.shape:
        raise ValueError(f"change {change.shape} vs classes {classes.shape} dims differ")
    return change & (classes == WATER)


def water_change_percentage(change, classes) -> float:
    """Percentage of valid pixels that changed into Water."""
    change = np.asarray(change, dtype=bool)
    classes = np.asarray(classes)
    if change.shape != classes.shape:
        raise ValueError(f"change {change.shape} vs classes {classes.shape} dims differ")
    valid = classes != INVALID
    total = int(valid.sum())
    if total == 0:
        raise ValueError("no valid pixels to take a percentage over")
    hits = int((change & (classes == WATER) & valid).sum())
    return 100.0 * hits / total


def flood_decision(percentage, threshold=DEFAULT_DECISION_THRESHOLD) -> str:
    """Flooding iff the percentage reaches the threshold (inclusive)."""
    if not 0.0 <= threshold <= 100.0:
        raise ValueError(f"decision threshold must lie in [0, 100], got {threshold}")
    return FLOODING if percentage >= threshold else NO_FLOODING


def build_report(records) -> FloodReport:
    """Summarize flagged-frame records (already in timestamp order).

    The onset is the first Flooding record's timestamp, and the extent is
    that frame's changed-water mask; with no Flooding records both are None.
    """
    records = tuple(records)
    onset, extent = None, None
    for record in records:
        if record.decision == FLOODING:
            onset = record.timestamp
            extent = record.water_change
            break
    return FloodReport(records=records, flood_onset=onset, extent=extent)
