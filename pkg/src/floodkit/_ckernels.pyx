# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the hot per-pixel kernels (see _pykernels.py)."""

import numpy as np

cimport numpy as cnp
from libc.math cimport NAN, sqrt

cnp.import_array()

# frames stay in their file dtype (float32) while statistics accumulate in
# float64, so the hot loop never materializes a converted copy
ctypedef fused pixel_t:
    cnp.float32_t
    cnp.float64_t


def similarity_map(pixel_t[:, :, ::1] data, cnp.uint8_t[:, ::1] valid,
                   double[:, :, ::1] mean, double[:, ::1] mean_sq_norm,
                   cnp.int64_t[:, ::1] counts):
    cdef Py_ssize_t h, v, b
    cdef Py_ssize_t height = data.shape[0], width = data.shape[1], depth = data.shape[2]
    cdef double dist_sq, var, norm_sq, d
    out = np.empty((height, width), dtype=np.float64)
    cdef double[:, ::1] smap = out
    with nogil:
        for h in range(height):
            for v in range(width):
                if valid[h, v] == 0 or counts[h, v] == 0:
                    smap[h, v] = NAN
                    continue
                dist_sq = 0.0
                norm_sq = 0.0
                for b in range(depth):
                    d = data[h, v, b] - mean[h, v, b]
                    dist_sq += d * d
                    norm_sq += mean[h, v, b] * mean[h, v, b]
                var = mean_sq_norm[h, v] - norm_sq
                if var < 0.0:
                    var = 0.0
                smap[h, v] = 1.0 / (1.0 + dist_sq + var)
    return out


def fold_frame(pixel_t[:, :, ::1] data, cnp.uint8_t[:, ::1] valid,
               double[:, :, ::1] mean, double[:, ::1] mean_sq_norm,
               cnp.int64_t[:, ::1] counts):
    cdef Py_ssize_t h, v, b
    cdef Py_ssize_t height = data.shape[0], width = data.shape[1], depth = data.shape[2]
    cdef double inv, norm_sq, x
    with nogil:
        for h in range(height):
            for v in range(width):
                if valid[h, v] == 0:
                    continue
                counts[h, v] += 1
                inv = 1.0 / counts[h, v]
                norm_sq = 0.0
                for b in range(depth):
                    x = data[h, v, b]
                    mean[h, v, b] += (x - mean[h, v, b]) * inv
                    norm_sq += x * x
                mean_sq_norm[h, v] += (norm_sq - mean_sq_norm[h, v]) * inv


def knn_search(double[:, ::1] queries, double[:, ::1] points, Py_ssize_t k):
    cdef Py_ssize_t n_queries = queries.shape[0]
    cdef Py_ssize_t n_points = points.shape[0]
    cdef Py_ssize_t depth = queries.shape[1]
    if k < 1 or k > n_points:
        raise ValueError(f"k must be in [1, {n_points}], got {k}")
    dist_arr = np.empty((n_queries, k), dtype=np.float64)
    idx_arr = np.empty((n_queries, k), dtype=np.int64)
    cdef double[:, ::1] out_d = dist_arr
    cdef cnp.int64_t[:, ::1] out_i = idx_arr
    cdef Py_ssize_t q, p, b, j, pos, filled
    cdef double d_sq, diff
    with nogil:
        for q in range(n_queries):
            filled = 0
            for p in range(n_points):
                d_sq = 0.0
                for b in range(depth):
                    diff = queries[q, b] - points[p, b]
                    d_sq += diff * diff
                if filled == k and d_sq >= out_d[q, k - 1]:
                    continue
                # insert after any equal entries: ties resolve to lower index
                # because points are visited in index order
                pos = filled if filled < k else k - 1
                while pos > 0 and out_d[q, pos - 1] > d_sq:
                    out_d[q, pos] = out_d[q, pos - 1]
                    out_i[q, pos] = out_i[q, pos - 1]
                    pos -= 1
                out_d[q, pos] = d_sq
                out_i[q, pos] = p
                if filled < k:
                    filled += 1
            for j in range(k):
                out_d[q, j] = sqrt(out_d[q, j])
    return dist_arr, idx_arr
