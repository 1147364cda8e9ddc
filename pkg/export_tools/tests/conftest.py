import numpy as np
import pytest
import tifffile


def write_scene(path, array):
    """Write a synthetic dataset-native raster in the format the suffix names."""
    path.parent.mkdir(parents=True, exist_ok=True)
    if path.suffix == ".npy":
        np.save(path, array)
    elif path.suffix in (".tif", ".tiff"):
        tifffile.imwrite(path, array, photometric="minisblack")
    else:
        raise ValueError(path.suffix)


@pytest.fixture
def rng():
    return np.random.default_rng(777)
