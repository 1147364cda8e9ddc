"""Numpy implementations of the hot per-pixel kernels.

These are the reference semantics; the compiled extension in _ckernels.pyx
implements the same contracts loop-wise. floodkit.kernels picks one at
import time.

Band-major accumulation keeps temporaries at (H, V) instead of (H, V, d)
and mirrors the compiled kernels' per-pixel addition order, so the two
backends agree to the last few ulps.
"""

import numpy as np


def similarity_map(data, valid, mean, mean_sq_norm, counts):
    """Per-pixel similarity of a frame against the running statistics.

    s = 1 / (1 + ||x - mean||^2 + var) with var = max(mean_sq_norm - ||mean||^2, 0).
    Pixels that are invalid in this frame, or have no accepted history
    (count 0), get NaN. Returns a float64 (H, V) map.
    """
    scored = (valid != 0) & (counts > 0)
    height, width, depth = data.shape
    dist_sq = np.zeros((height, width), dtype=np.float64)
    mean_norm = np.zeros((height, width), dtype=np.float64)
    tmp = np.empty((height, width), dtype=np.float64)
    for b in range(depth):
        np.subtract(data[:, :, b], mean[:, :, b], out=tmp)
        tmp *= tmp
        dist_sq += tmp
        np.multiply(mean[:, :, b], mean[:, :, b], out=tmp)
        mean_norm += tmp
    var = mean_sq_norm - mean_norm
    np.clip(var, 0.0, None, out=var)
    var += dist_sq
    var += 1.0
    smap = np.divide(1.0, var, out=var)
    smap[~scored] = np.nan
    return smap


def fold_frame(data, valid, mean, mean_sq_norm, counts):
    """Fold one accepted frame into the running statistics, in place.

    Per valid pixel the running mean vector and mean squared norm become the
    batch statistics over all frames folded so far at that pixel; invalid
    pixels are untouched (their data may be non-finite).
    """
    valid = valid != 0
    invalid = ~valid
    counts += valid
    inv = np.where(valid, 1.0 / np.maximum(counts, 1), 0.0)
    height, width, depth = data.shape
    norm_sq = np.zeros((height, width), dtype=np.float64)
    tmp = np.empty((height, width), dtype=np.float64)
    for b in range(depth):
        band = data[:, :, b]
        mean_band = mean[:, :, b]
        np.subtract(band, mean_band, out=tmp)
        tmp[invalid] = 0.0  # invalid pixels may hold NaN
        tmp *= inv
        mean_band += tmp
        np.multiply(band, band, out=tmp)
        norm_sq += tmp
    norm_sq -= mean_sq_norm
    norm_sq[invalid] = 0.0
    norm_sq *= inv
    mean_sq_norm += norm_sq


def knn_search(queries, points, k):
    """Exact k-nearest-neighbour search by Euclidean distance.

    Returns (distances, indices), each (Q, k), rows sorted by nondecreasing
    distance with ties broken toward the lower point index. Distances are
    plain (not squared) Euclidean.
    """
    n_queries = queries.shape[0]
    n_points = points.shape[0]
    if not 1 <= k <= n_points:
        raise ValueError(f"k must be in [1, {n_points}], got {k}")
    out_d = np.empty((n_queries, k), dtype=np.float64)
    out_i = np.empty((n_queries, k), dtype=np.int64)
    # chunk queries so the (chunk, P, D) temporary stays modest
    per_row = max(points.size, 1)
    chunk = max(1, min(n_queries, int(4_000_000 // per_row) + 1))
    for start in range(0, n_queries, chunk):
        stop = min(start + chunk, n_queries)
        diff = queries[start:stop, None, :] - points[None, :, :]
        d_sq = np.einsum("qpd,qpd->qp", diff, diff)
        order = np.argsort(d_sq, axis=1, kind="stable")[:, :k]
        out_i[start:stop] = order
        out_d[start:stop] = np.take_along_axis(d_sq, order, axis=1)
    np.sqrt(out_d, out=out_d)
    return out_d, out_i
