"""Backend selection for the hot per-pixel kernels.

The compiled extension is used when it imported cleanly; otherwise the
numpy implementations take over. Set FLOODKIT_PURE_PYTHON=1 to force the
numpy path (the benchmark suite uses this to compare both).
"""

import os

import numpy as np

from . import _pykernels

if os.environ.get("FLOODKIT_PURE_PYTHON"):
    _impl = _pykernels
    BACKEND = "numpy"
else:
    try:
        from . import _ckernels as _impl
        BACKEND = "compiled"
    except ImportError:
        _impl = _pykernels
        BACKEND = "numpy"


def _check_stats(data, valid, mean, mean_sq_norm, counts):
    shape = data.shape[:2]
    if valid.shape != shape or mean.shape != data.shape:
        raise ValueError("statistics field does not match frame dims")
    if mean_sq_norm.shape != shape or counts.shape != shape:
        raise ValueError("statistics field does not match frame dims")


def _as_pixels(data):
    """Frames pass through in float32 or float64; anything else upcasts."""
    data = np.asarray(data)
    if data.dtype in (np.float32, np.float64):
        return np.ascontiguousarray(data)
    return np.ascontiguousarray(data, dtype=np.float64)


def similarity_map(data, valid, mean, mean_sq_norm, counts):
    """Dispatch to the active backend; see _pykernels.similarity_map."""
    _check_stats(data, valid, mean, mean_sq_norm, counts)
    data = _as_pixels(data)
    valid = np.ascontiguousarray(valid, dtype=np.uint8)
    return np.asarray(_impl.similarity_map(data, valid, mean, mean_sq_norm, counts))


def fold_frame(data, valid, mean, mean_sq_norm, counts):
    """Fold a frame into mean/mean_sq_norm/counts in place.

    The three statistics arrays must already be float64/float64/int64
    C-contiguous (PixelStatField owns that layout); data and valid are
    coerced here.
    """
    _check_stats(data, valid, mean, mean_sq_norm, counts)
    data = _as_pixels(data)
    valid = np.ascontiguousarray(valid, dtype=np.uint8)
    _impl.fold_frame(data, valid, mean, mean_sq_norm, counts)


def knn_search(queries, points, k):
    """Exact top-k Euclidean search; see _pykernels.knn_search."""
    queries = np.ascontiguousarray(queries, dtype=np.float64)
    points = np.ascontiguousarray(points, dtype=np.float64)
    if queries.ndim != 2 or points.ndim != 2 or queries.shape[1] != points.shape[1]:
        raise ValueError(
            f"queries {queries.shape} and points {points.shape} must be 2-D with equal width"
        )
    dist, idx = _impl.knn_search(queries, points, int(k))
    return np.asarray(dist), np.asarray(idx)
