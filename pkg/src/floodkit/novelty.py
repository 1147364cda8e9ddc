"""Frame-level novelty detection and per-pixel change from recursive statistics.

Each pixel keeps a running mean vector and a running mean of squared norms
over the frames accepted as normal; similarity of a new value against that
history is

    s = 1 / (1 + ||x - mean||^2 + var),   var = max(mean_sq_norm - ||mean||^2, 0)

so s is in (0, 1] and equals 1 only for a zero-variance history at its mean.
A frame whose mean similarity S drops below the running mean of S minus m
running standard deviations is flagged as novel. Scoring is test-then-train:
a frame is always scored against statistics that exclude it, series
statistics ingest every S, and pixel statistics ingest only normal frames.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .rasters import MultispectralImage

DEFAULT_SIGMA_MULTIPLIER = 3.0
DEFAULT_CHANGE_THRESHOLD = 0.5


@dataclass
class PixelStatField:
    """Per-pixel running statistics over accepted (non-novel) frames.

    `pixel_counts` tracks how many accepted frames were valid at each pixel,
    so pixels that drop out of some validity masks still carry exact means.
    """

    mean: np.ndarray          # (H, V, d) float64
    mean_sq_norm: np.ndarray  # (H, V) float64
    pixel_counts: np.ndarray  # (H, V) int64
    accepted_count: int = 0   # frames folded in

    @classmethod
    def empty(cls, height, width, depth):
        return cls(
            mean=np.zeros((height, width, depth), dtype=np.float64),
            mean_sq_norm=np.zeros((height, width), dtype=np.float64),
            pixel_counts=np.zeros((height, width), dtype=np.int64),
        )

    def copy(self):
        return PixelStatField(
            mean=self.mean.copy(),
            mean_sq_norm=self.mean_sq_norm.copy(),
            pixel_counts=self.pixel_counts.copy(),
            accepted_count=self.accepted_count,
        )

    def fold(self, image: "MultispectralImage") -> None:
        """Fold an accepted frame into this field, in place."""
        if self.shape != image.data.shape:
            raise ValueError(f"field {self.shape} does not match image {image.data.shape}")
        kernels.fold_frame(
            image.data, image.valid_mask, self.mean, self.mean_sq_norm, self.pixel_counts
        )
        self.accepted_count += 1

    @property
    def shape(self):
        return self.mean.shape


@dataclass(frozen=True)
class SeriesState:
    """Running mean and variance of the per-frame similarity sequence."""

    frames_seen: int = 0
    mean_similarity: float = 0.0
    similarity_var: float = 0.0

    @property
    def sigma(self) -> float:
        return math.sqrt(self.similarity_var)


@dataclass(frozen=True)
class FrameVerdict:
    image_id: str
    timestamp: str
    similarity: float
    threshold: float | None   # None for the bootstrap frame
    is_novel: bool
    similarity_map: np.ndarray | None = None


def pixel_similarity(x, mean_vec, mean_sq_norm) -> float:
    """Similarity of one pixel value against its running statistics."""
    x = np.asarray(x, dtype=np.float64)
    mean_vec = np.asarray(mean_vec, dtype=np.float64)
    if not (np.isfinite(x).all() and np.isfinite(mean_vec).all() and np.isfinite(mean_sq_norm)):
        raise ValueError("pixel similarity requires finite inputs")
    var = max(float(mean_sq_norm) - float(mean_vec @ mean_vec), 0.0)
    diff = x - mean_vec
    return 1.0 / (1.0 + float(diff @ diff) + var)


def similarity_map(image: MultispectralImage, field: PixelStatField) -> np.ndarray:
    """Per-pixel similarities of `image` against `field`; NaN where unscored."""
    if field.shape != image.data.shape:
        raise ValueError(f"field {field.shape} does not match image {image.data.shape}")
    return kernels.similarity_map(
        image.data, image.valid_mask, field.mean, field.mean_sq_norm, field.pixel_counts
    )


def image_similarity(image: MultispectralImage, field: PixelStatField) -> float:
    """Mean of the per-pixel similarities over scored pixels."""
    if field.accepted_count < 1:
        raise ValueError("image similarity needs at least one accepted frame of history")
    smap = similarity_map(image, field)
    return _mean_similarity(smap)


def _mean_similarity(smap) -> float:
    scored = np.isfinite(smap)
    if not scored.any():
        raise ValueError("no valid pixels with history to score")
    return float(smap[scored].mean())


def update_pixel_stats(field: PixelStatField, image: MultispectralImage) -> PixelStatField:
    """Return a new field with the (non-novel) frame folded in."""
    out = field.copy()
    out.fold(image)
    return out


def update_series_stats(state: SeriesState, similarity: float) -> SeriesState:
    """Fold one frame similarity into the running series mean and variance.

    First frame sets mean := S and variance := 0; afterwards
    mean_k = ((k-1) mean_{k-1} + S_k) / k and
    var_k = ((k-1) var_{k-1} + (S_k - mean_k)^2) / k, the variance recursion
    using the freshly updated mean.
    """
    if not 0.0 < similarity <= 1.0:
        raise ValueError(f"similarity must lie in (0, 1], got {similarity}")
    k = state.frames_seen + 1
    if k == 1:
        return SeriesState(frames_seen=1, mean_similarity=similarity, similarity_var=0.0)
    mean = ((k - 1) / k) * state.mean_similarity + similarity / k
    var = ((k - 1) / k) * state.similarity_var + (similarity - mean) ** 2 / k
    return SeriesState(frames_seen=k, mean_similarity=mean, similarity_var=var)


def detect_novelty(similarity: float, state: SeriesState, multiplier: float) -> bool:
    """True iff S falls strictly below mean - m * sigma of the prior frames.

    A baseline of fewer than two frames never flags: the single-frame state
    has zero variance by construction (frame 1 bootstraps with S := 1), so
    the band would be degenerate and any noisy second frame would trip it.
    """
    if multiplier <= 0:
        raise ValueError(f"sigma multiplier must be positive, got {multiplier}")
    if state.frames_seen < 1:
        raise ValueError("novelty needs at least one prior frame")
    if state.frames_seen < 2:
        return False
    return similarity < state.mean_similarity - multiplier * state.sigma


def process_frame(field, state, image, multiplier=DEFAULT_SIGMA_MULTIPLIER,
                  keep_similarity_map=True):
    """Run one frame through the detector; returns (verdict, field, state).

    The first frame bootstraps: S := 1, never novel, statistics initialized
    from it. Series statistics always ingest S; pixel statistics ingest the
    frame only when it is not novel, so a novel frame never shifts the
    per-pixel baseline.

    The input field is consumed: accepted frames are folded into its buffers
    in place (no per-frame copies), and the same object comes back.
    """
    if state.frames_seen == 0:
        smap = np.where(image.valid_mask, 1.0, np.nan)
        similarity, threshold, is_novel = 1.0, None, False
    else:
        smap = similarity_map(image, field)
        similarity = _mean_similarity(smap)
        threshold = state.mean_similarity - multiplier * state.sigma
        is_novel = detect_novelty(similarity, state, multiplier)
    new_state = update_series_stats(state, similarity)
    if not is_novel:
        field.fold(image)
    verdict = FrameVerdict(
        image_id=image.image_id,
        timestamp=image.timestamp,
        similarity=similarity,
        threshold=threshold,
        is_novel=is_novel,
        similarity_map=smap if keep_similarity_map else None,
    )
    return verdict, field, new_state


def binary_change_map(similarity_map, threshold=DEFAULT_CHANGE_THRESHOLD) -> np.ndarray:
    """Changed iff the pixel was scored and its similarity is strictly below
    the threshold; unscored (NaN) pixels never change."""
    if not 0.0 <= threshold <= 1.0:
        raise ValueError(f"change threshold must lie in [0, 1], got {threshold}")
    smap = np.asarray(similarity_map, dtype=np.float64)
    with np.errstate(invalid="ignore"):
        return smap < threshold


def remove_small_regions(mask, min_size: int) -> np.ndarray:
    """Optional post-filter: drop 4-connected changed regions below min_size.

    Off by default in the pipeline (min_size <= 1 returns the input mask
    unchanged); the detector itself applies no morphological cleanup.
    """
    if min_size <= 1:
        return mask
    mask = np.asarray(mask, dtype=bool)
    keep = np.zeros_like(mask)
    seen = np.zeros_like(mask)
    height, width = mask.shape
    for start_r, start_c in zip(*np.nonzero(mask)):
        if seen[start_r, start_c]:
            continue
        stack = [(start_r, start_c)]
        seen[start_r, start_c] = True
        component = []
        while stack:
            r, c = stack.pop()
            component.append((r, c))
            for nr, nc in ((r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)):
                if 0 <= nr < height and 0 <= nc < width and mask[nr, nc] and not seen[nr, nc]:
                    seen[nr, nc] = True
                    stack.append((nr, nc))
        if len(component) >= min_size:
            rows, cols = zip(*component)
            keep[rows, cols] = True
    return keep
