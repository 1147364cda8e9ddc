"""Seeded, deterministic clustering used to build prototype banks.

Mini-batch k-means follows Sculley's scheme: k-means++ initialization,
per-centroid assignment counts, and a 1/count learning rate per folded
sample. K-medoids is exact PAM (BUILD then SWAP) under squared Euclidean
cost with ties broken toward the lower sample index, so small cases can be
checked against exhaustive search.
"""

import warnings

import numpy as np

DEFAULT_BATCH_SIZE = 1024


def _distinct_rows(points):
    """Unique rows in first-occurrence order."""
    _, first = np.unique(points, axis=0, return_index=True)
    return points[np.sort(first)]


def _sq_dist(a, b):
    """Pairwise squared Euclidean distances, (len(a), len(b))."""
    diff = a[:, None, :] - b[None, :, :]
    return np.einsum("ijd,ijd->ij", diff, diff)


def kmeans_plusplus(points, n_centers, rng):
    """Classic D^2-weighted seeding; deterministic for a given generator."""
    n = points.shape[0]
    centers = np.empty((n_centers, points.shape[1]), dtype=np.float64)
    first = int(rng.integers(n))
    centers[0] = points[first]
    if n_centers == 1:
        return centers
    closest = _sq_dist(points, centers[:1])[:, 0]
    for i in range(1, n_centers):
        total = closest.sum()
        if total <= 0:
            # all remaining mass at distance zero: duplicate-heavy input
            pick = int(rng.integers(n))
        else:
            pick = int(rng.choice(n, p=closest / total))
        centers[i] = points[pick]
        np.minimum(closest, _sq_dist(points, centers[i : i + 1])[:, 0], out=closest)
    return centers


def minibatch_kmeans(points, n_centers, batch_size=DEFAULT_BATCH_SIZE, iters=None, seed=0):
    """Mini-batch k-means; returns (n_centers, D) centroids.

    `iters` defaults to 100 * n_centers batches. Within a batch, assignments
    are computed against the batch-start centroids and then folded with the
    1/count rate; the fold is applied in closed form per centroid (weighted
    mean of the old centroid at its count plus the assigned samples), which
    is the same update the sample-by-sample loop produces.

    If n_centers exceeds the number of distinct samples, warns and returns
    the distinct samples themselves.
    """
    points = np.ascontiguousarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[0] == 0:
        raise ValueError("samples must be a nonempty (N, D) array")
    if n_centers < 1:
        raise ValueError(f"need at least one cluster, got {n_centers}")
    distinct = _distinct_rows(points)
    if n_centers > distinct.shape[0]:
        warnings.warn(
            f"requested {n_centers} clusters but only {distinct.shape[0]} distinct "
            "samples; returning the distinct samples as centroids"
        )
        return distinct.copy()
    if iters is None:
        iters = 100 * n_centers
    rng = np.random.default_rng(seed)
    centroids = kmeans_plusplus(points, n_centers, rng)
    counts = np.zeros(n_centers, dtype=np.int64)
    n = points.shape[0]
    for _ in range(iters):
        batch = points[rng.integers(0, n, size=batch_size)]
        assign = np.argmin(_sq_dist(batch, centroids), axis=1)
        batch_counts = np.bincount(assign, minlength=n_centers)
        hit = batch_counts > 0
        sums = np.zeros_like(centroids)
        np.add.at(sums, assign, batch)
        new_counts = counts + batch_counts
        centroids[hit] = (
            centroids[hit] * counts[hit, None] + sums[hit]
        ) / new_counts[hit, None]
        counts = new_counts
    return centroids


def assign_labels(points, centroids):
    """Index of the nearest centroid per point; ties go to the lower index."""
    return np.argmin(_sq_dist(points, centroids), axis=1)


def kmedoids(points, n_centers, seed=0):
    """Exact PAM under squared Euclidean cost; returns sorted medoid indices.

    BUILD greedily picks the points that most reduce total cost; SWAP then
    applies the single best improving (medoid, candidate) exchange until
    none remains. Every tie breaks toward the lower sample index. The
    procedure is deterministic, so `seed` is accepted only for interface
    parity with the k-means path.
    """
    del seed
    points = np.ascontiguousarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[0] == 0:
        raise ValueError("samples must be a nonempty (N, D) array")
    if n_centers < 1:
        raise ValueError(f"need at least one cluster, got {n_centers}")
    n = points.shape[0]
    distinct = _distinct_rows(points)
    if n_centers > distinct.shape[0]:
        warnings.warn(
            f"requested {n_centers} medoids but only {distinct.shape[0]} distinct "
            "samples; returning one medoid per distinct sample"
        )
        keep = []
        seen = set()
        for i in range(n):
            key = points[i].tobytes()
            if key not in seen:
                seen.add(key)
                keep.append(i)
        return np.asarray(keep, dtype=np.int64)

    d_sq = _sq_dist(points, points)

    # BUILD
    medoids = [int(np.argmin(d_sq.sum(axis=1)))]
    nearest = d_sq[:, medoids[0]].copy()
    while len(medoids) < n_centers:
        reduction = np.maximum(nearest[:, None] - d_sq, 0.0).sum(axis=0)
        reduction[medoids] = -1.0
        pick = int(np.argmax(reduction))
        medoids.append(pick)
        np.minimum(nearest, d_sq[:, pick], out=nearest)
    medoids = sorted(medoids)

    # SWAP: accept the best strictly improving exchange, repeat to local optimum
    while True:
        med = np.asarray(medoids)
        others = np.setdiff1d(np.arange(n), med)
        if others.size == 0:
            break
        to_meds = d_sq[:, med]
        order = np.argsort(to_meds, axis=1, kind="stable")
        d1 = np.take_along_axis(to_meds, order[:, :1], axis=1)[:, 0]
        d2 = (
            np.take_along_axis(to_meds, order[:, 1:2], axis=1)[:, 0]
            if len(medoids) > 1
            else np.full(n, np.inf)
        )
        nearest_med = med[order[:, 0]]
        cost = d1.sum()
        tol = 1e-9 * (1.0 + cost)

        best_delta, best_swap = -tol, None
        for mi, m in enumerate(medoids):
            served = nearest_med == m
            base = np.where(served, d2, d1)
            candidate_cost = np.minimum(base[:, None], d_sq[:, others]).sum(axis=0)
            deltas = candidate_cost - cost
            ji = int(np.argmin(deltas))
            if deltas[ji] < best_delta:
                best_delta = float(deltas[ji])
                best_swap = (mi, int(others[ji]))
        if best_swap is None:
            break
        mi, j = best_swap
        medoids[mi] = j
        medoids = sorted(medoids)
    return np.asarray(medoids, dtype=np.int64)
