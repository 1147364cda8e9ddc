"""Scene readers for dataset-native rasters (.tif, .npy, .npz).

Geo-metadata is ignored throughout: reprojection and tiling are out of
scope, only pixel values travel. Band-major TIFFs (bands, H, V) are
transposed to the (H, V, bands) layout the converters emit.
"""

from pathlib import Path

import numpy as np

try:
    import tifffile
except ImportError:  # pragma: no cover
    tifffile = None


def read_scene(path) -> np.ndarray:
    """Read a raster as float or integer numpy array, (H, V[, bands])."""
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix == ".npy":
        arr = np.load(path)
    elif suffix == ".npz":
        with np.load(path) as npz:
            key = "data" if "data" in npz else list(npz.keys())[0]
            arr = npz[key]
    elif suffix in (".tif", ".tiff"):
        if tifffile is None:
            raise RuntimeError("reading TIFF scenes requires the tifffile package")
        arr = tifffile.imread(path)
    else:
        raise ValueError(f"{path}: unsupported raster format {suffix!r}")
    arr = np.asarray(arr)
    if arr.ndim == 3 and arr.shape[0] <= 16 < arr.shape[2]:
        # band-major layout (common in exported GeoTIFF stacks)
        arr = np.transpose(arr, (1, 2, 0))
    return arr
