"""Multi-stage flood detection from multispectral satellite image time series.

Stages: (1) frame-level novelty detection from recursive per-pixel
similarity statistics, (2) binary change maps on flagged frames,
(3) prototype-based kNN labeling of changes into Land/Water/Cloud with
per-pixel confidence and evidence, (4) a flood/no-flood decision with the
onset time and extent.
"""

__version__ = "0.1.0"

from .decision import (
    FloodReport,
    FrameRecord,
    build_report,
    flood_decision,
    water_change_percentage,
)
from .features import ProviderSpec, features
from .kernels import BACKEND
from .novelty import (
    FrameVerdict,
    PixelStatField,
    SeriesState,
    binary_change_map,
    detect_novelty,
    image_similarity,
    pixel_similarity,
    process_frame,
    update_pixel_stats,
    update_series_stats,
)
from .prototypes import (
    PrototypeBank,
    build_prototype_bank,
    classify_pixel,
    collect_class_pixels,
    explain_pixel,
    segment_image,
    threshold_confidence,
)
from .rasters import CLOUD, INVALID, LAND, WATER, MultispectralImage, load_image
from .tensorfile import read_tensor, write_tensor

__all__ = [
    "BACKEND",
    "CLOUD",
    "FloodReport",
    "FrameRecord",
    "FrameVerdict",
    "INVALID",
    "LAND",
    "MultispectralImage",
    "PixelStatField",
    "PrototypeBank",
    "ProviderSpec",
    "SeriesState",
    "WATER",
    "binary_change_map",
    "build_prototype_bank",
    "build_report",
    "classify_pixel",
    "collect_class_pixels",
    "detect_novelty",
    "explain_pixel",
    "features",
    "flood_decision",
    "image_similarity",
    "load_image",
    "pixel_similarity",
    "process_frame",
    "read_tensor",
    "segment_image",
    "threshold_confidence",
    "update_pixel_stats",
    "update_series_stats",
    "water_change_percentage",
    "write_tensor",
]
