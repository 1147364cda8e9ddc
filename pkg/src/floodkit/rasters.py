"""Domain rasters: multispectral images, class maps, and their file helpers.

Class encoding is normative everywhere in this package:
0 = Invalid, 1 = Land, 2 = Water, 3 = Cloud. Invalid pixels are excluded
from every statistic, cluster sample, metric, and percentage downstream.
"""

from dataclasses import dataclass, field

import numpy as np

from . import tensorfile

INVALID, LAND, WATER, CLOUD = 0, 1, 2, 3
CLASS_NAMES = {INVALID: "Invalid", LAND: "Land", WATER: "Water", CLOUD: "Cloud"}

# Fixed Sentinel-2 band order; files carry no band metadata, this order is
# normative for 13-band tensors.
SENTINEL2_BANDS = (
    "B1", "B2", "B3", "B4", "B5", "B6", "B7",
    "B8", "B8A", "B9", "B10", "B11", "B12",
)


@dataclass(frozen=True)
class MultispectralImage:
    """One acquisition: (H, V, n) reflectances plus validity and identity.

    Immutable after load; all downstream stages treat `data` as read-only.
    """

    image_id: str
    timestamp: str
    data: np.ndarray = field(repr=False)
    valid_mask: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.data.ndim != 3:
            raise ValueError(f"image data must be (H, V, n), got shape {self.data.shape}")
        if self.valid_mask.shape != self.data.shape[:2]:
            raise ValueError(
                f"valid mask {self.valid_mask.shape} does not match image "
                f"{self.data.shape[:2]}"
            )
        if min(self.data.shape) < 1:
            raise ValueError(f"degenerate image shape {self.data.shape}")
        if not np.isfinite(self.data[self.valid_mask]).all():
            raise ValueError(f"image {self.image_id}: non-finite values at valid pixels")

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def band_count(self) -> int:
        return self.data.shape[2]


def load_image(data_path, mask_path=None, *, timestamp="", image_id="") -> MultispectralImage:
    """Load an image tensor and optional validity mask from container files.

    A missing mask means every pixel is valid. The data tensor must be
    rank-3 (H, V, n); the mask, when present, rank-2 uint8 with matching
    leading dims (nonzero = valid).
    """
    data = tensorfile.read_tensor(data_path)
    if data.ndim != 3:
        raise ValueError(f"{data_path}: expected rank-3 image tensor, got rank {data.ndim}")
    if mask_path is not None:
        mask = tensorfile.read_tensor(mask_path)
        if mask.ndim != 2:
            raise ValueError(f"{mask_path}: expected rank-2 mask tensor, got rank {mask.ndim}")
        if mask.dtype != np.uint8:
            raise ValueError(f"{mask_path}: mask must be a dtype-2 (uint8) tensor")
        if mask.shape != data.shape[:2]:
            raise ValueError(
                f"mask dims {mask.shape} do not match image dims {data.shape[:2]}"
            )
        valid = mask != 0
    else:
        valid = np.ones(data.shape[:2], dtype=bool)
    return MultispectralImage(image_id=image_id, timestamp=timestamp, data=data, valid_mask=valid)


def save_class_map(path, labels) -> None:
    """Write a label raster as a dtype-2 tensor, validating the encoding."""
    arr = np.asarray(labels)
    if arr.ndim != 2:
        raise ValueError(f"class map must be 2-D, got shape {arr.shape}")
    if arr.min() < INVALID or arr.max() > CLOUD:
        raise ValueError("class map labels must lie in {0, 1, 2, 3}")
    tensorfile.write_tensor(path, arr.astype(np.uint8))


def load_class_map(path) -> np.ndarray:
    arr = tensorfile.read_tensor(path)
    if arr.ndim != 2 or arr.dtype != np.uint8:
        raise ValueError(f"{path}: class maps are rank-2 uint8 tensors")
    if arr.max() > CLOUD:
        raise ValueError(f"{path}: label {arr.max()} outside {{0, 1, 2, 3}}")
    return arr


def save_mask(path, mask) -> None:
    """Write a boolean raster (change map, extent, validity) as 0/1 uint8."""
    arr = np.asarray(mask)
    if arr.ndim != 2:
        raise ValueError(f"mask must be 2-D, got shape {arr.shape}")
    tensorfile.write_tensor(path, (arr != 0).astype(np.uint8))


def load_mask(path) -> np.ndarray:
    arr = tensorfile.read_tensor(path)
    if arr.ndim != 2:
        raise ValueError(f"{path}: masks are rank-2 tensors")
    return arr != 0
