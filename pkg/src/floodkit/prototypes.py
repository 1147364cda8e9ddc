"""Prototype bank training, kNN segmentation, and per-pixel explanations.

A bank holds per-class prototypes, each carrying a latent vector (the space
distances are measured in), the corresponding raw 13-band spectrum, and,
for prototypes that are real training pixels, the provenance of that pixel.
Classification is a majority vote among the k nearest prototypes across all
classes jointly; the agreement fraction is the confidence.
"""

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import clustering, kernels
from .features import ProviderSpec, features
from .rasters import CLASS_NAMES, INVALID, MultispectralImage

DEFAULT_NEIGHBORS = 10
DEFAULT_PROTOTYPES_PER_CLASS = 100
DEFAULT_CONFIDENCE_THRESHOLD = 0.8

METHODS = ("minibatch-kmeans", "kmedoids")
MODES = ("centroid", "nearest-real-pixel")


@dataclass(frozen=True)
class Provenance:
    image_id: str
    row: int
    col: int


@dataclass(frozen=True)
class Prototype:
    label: int
    latent: np.ndarray
    raw: np.ndarray
    provenance: Provenance | None = None


@dataclass
class ClassSamples:
    """Training pixels gathered for one class."""

    latent: np.ndarray            # (M, D) float64
    raw: np.ndarray               # (M, n) float64
    provenance: list[Provenance]

    def __len__(self):
        return self.latent.shape[0]


@dataclass
class PrototypeBank:
    method: str
    mode: str
    seed: int
    latent_dim: int
    band_count: int
    per_class: int
    prototypes: list[Prototype]
    _latents: np.ndarray | None = field(default=None, repr=False)
    _labels: np.ndarray | None = field(default=None, repr=False)

    def __len__(self):
        return len(self.prototypes)

    @property
    def latent_matrix(self) -> np.ndarray:
        if self._latents is None:
            self._latents = np.ascontiguousarray(
                [p.latent for p in self.prototypes], dtype=np.float64
            )
        return self._latents

    @property
    def label_vector(self) -> np.ndarray:
        if self._labels is None:
            self._labels = np.asarray([p.label for p in self.prototypes], dtype=np.int64)
        return self._labels

    def to_json(self) -> str:
        protos = []
        for p in self.prototypes:
            entry = {
                "class": int(p.label),
                "y": [float(v) for v in p.latent],
                "x": [float(v) for v in p.raw],
            }
            if p.provenance is not None:
                entry["provenance"] = {
                    "image_id": p.provenance.image_id,
                    "h": int(p.provenance.row),
                    "v": int(p.provenance.col),
                }
            protos.append(entry)
        doc = {
            "method": self.method,
            "mode": self.mode,
            "seed": int(self.seed),
            "D": int(self.latent_dim),
            "n": int(self.band_count),
            "L_per_class": int(self.per_class),
            "prototypes": protos,
        }
        return json.dumps(doc, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "PrototypeBank":
        doc = json.loads(text)
        protos = []
        for entry in doc["prototypes"]:
            prov = None
            if "provenance" in entry and entry["provenance"] is not None:
                pv = entry["provenance"]
                prov = Provenance(image_id=pv["image_id"], row=int(pv["h"]), col=int(pv["v"]))
            protos.append(
                Prototype(
                    label=int(entry["class"]),
                    latent=np.asarray(entry["y"], dtype=np.float64),
                    raw=np.asarray(entry["x"], dtype=np.float64),
                    provenance=prov,
                )
            )
        return cls(
            method=doc["method"],
            mode=doc["mode"],
            seed=int(doc["seed"]),
            latent_dim=int(doc["D"]),
            band_count=int(doc["n"]),
            per_class=int(doc["L_per_class"]),
            prototypes=protos,
        )

    def save(self, path) -> None:
        Path(path).write_text(self.to_json() + "\n")

    @classmethod
    def load(cls, path) -> "PrototypeBank":
        return cls.from_json(Path(path).read_text())


@dataclass(frozen=True)
class NeighborInfo:
    distance: float
    label: int
    prototype_index: int
    raw: np.ndarray
    provenance: Provenance | None


@dataclass(frozen=True)
class PixelExplanation:
    row: int
    col: int
    neighbors: list[NeighborInfo]   # nondecreasing distance
    label: int
    confidence: float

    def to_dict(self) -> dict:
        return {
            "query": {"h": self.row, "v": self.col},
            "class": self.label,
            "class_name": CLASS_NAMES[self.label],
            "confidence": self.confidence,
            "neighbors": [
                {
                    "rank": i + 1,
                    "distance": nb.distance,
                    "class": nb.label,
                    "class_name": CLASS_NAMES[nb.label],
                    "raw": [float(v) for v in nb.raw],
                    "provenance": (
                        None
                        if nb.provenance is None
                        else {
                            "image_id": nb.provenance.image_id,
                            "h": nb.provenance.row,
                            "v": nb.provenance.col,
                        }
                    ),
                }
                for i, nb in enumerate(self.neighbors)
            ],
        }


def collect_class_pixels(labeled_images, provider: ProviderSpec, cap_per_class,
                         seed=0, classes=(1, 2, 3)):
    """Gather (latent, raw, provenance) samples per class from labeled images.

    `labeled_images` is a sequence of (MultispectralImage, label_map) pairs.
    Sampling is uniform reservoir sampling per class, seeded, and
    deterministic for a fixed seed and input order. Invalid pixels and
    pixels labeled Invalid never enter. Raises if a requested class has no
    pixels anywhere in the corpus.
    """
    reservoirs = {c: [] for c in classes}
    seen = {c: 0 for c in classes}
    rngs = {c: np.random.default_rng([seed, c]) for c in classes}
    for image, labels in labeled_images:
        labels = np.asarray(labels)
        if labels.shape != image.data.shape[:2]:
            raise ValueError(
                f"label map {labels.shape} does not match image {image.data.shape[:2]}"
            )
        latent = np.asarray(features(provider, image), dtype=np.float64)
        raw = np.asarray(image.data, dtype=np.float64)
        usable = image.valid_mask & (labels != INVALID)
        for c in classes:
            flat = np.flatnonzero((labels == c) & usable)
            if flat.size == 0:
                continue
            _reservoir_update(
                reservoirs[c], seen[c], flat, cap_per_class, rngs[c],
                image, latent, raw,
            )
            seen[c] += flat.size
    empty = [c for c in classes if not reservoirs[c]]
    if empty:
        names = ", ".join(CLASS_NAMES[c] for c in empty)
        raise ValueError(f"no training pixels found for class(es): {names}")
    out = {}
    for c in classes:
        rows = reservoirs[c]
        out[c] = ClassSamples(
            latent=np.asarray([r[0] for r in rows], dtype=np.float64),
            raw=np.asarray([r[1] for r in rows], dtype=np.float64),
            provenance=[r[2] for r in rows],
        )
    return out


def _reservoir_update(reservoir, seen, flat_indices, cap, rng, image, latent, raw):
    """Standard reservoir sampling over one image's class pixels.

    Slot draws for the whole block are generated in one call so the RNG
    stream is consumed deterministically regardless of how many accept.
    """
    width = image.data.shape[1]

    def grab(flat):
        r, c = divmod(int(flat), width)
        return (latent[r, c], raw[r, c], Provenance(image.image_id, r, c))

    pos = 0
    if cap is None:
        reservoir.extend(grab(f) for f in flat_indices)
        return
    while len(reservoir) < cap and pos < flat_indices.size:
        reservoir.append(grab(flat_indices[pos]))
        pos += 1
    rest = flat_indices[pos:]
    if rest.size == 0:
        return
    ranks = seen + pos + np.arange(rest.size, dtype=np.int64)
    slots = rng.integers(0, ranks + 1)
    for offset in np.flatnonzero(slots < cap):
        reservoir[slots[offset]] = grab(rest[offset])


def nearest_real_pixel(centroid, samples: ClassSamples) -> int:
    """Index of the class sample nearest to `centroid` in latent space.

    Ties break toward the lower sample index.
    """
    if len(samples) == 0:
        raise ValueError("no samples to match against")
    diff = samples.latent - np.asarray(centroid, dtype=np.float64)
    return int(np.argmin(np.einsum("md,md->m", diff, diff)))


def build_prototype_bank(class_samples, method, mode, per_class=DEFAULT_PROTOTYPES_PER_CLASS,
                         seed=0, batch_size=clustering.DEFAULT_BATCH_SIZE, iters=None):
    """Cluster each class's latent samples and assemble the bank.

    Centroid mode stores the centroids themselves, with the raw spectrum set
    to the mean of the member pixels' spectra (synthetic, so no provenance).
    Nearest-real-pixel mode and the k-medoids method store actual training
    pixels, provenance included.
    """
    if method not in METHODS:
        raise ValueError(f"method must be one of {METHODS}, got {method!r}")
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    if per_class < 1:
        raise ValueError(f"prototypes per class must be >= 1, got {per_class}")
    if not class_samples:
        raise ValueError("no classes supplied")
    latent_dim = None
    band_count = None
    prototypes = []
    for label in sorted(class_samples):
        samples = class_samples[label]
        if len(samples) == 0:
            raise ValueError(f"class {CLASS_NAMES.get(label, label)} has no samples")
        if latent_dim is None:
            latent_dim, band_count = samples.latent.shape[1], samples.raw.shape[1]
        elif samples.latent.shape[1] != latent_dim:
            raise ValueError("classes disagree on latent dimensionality")
        if method == "kmedoids":
            for idx in clustering.kmedoids(samples.latent, per_class, seed=[seed, label]):
                prototypes.append(
                    Prototype(
                        label=label,
                        latent=samples.latent[idx].copy(),
                        raw=samples.raw[idx].copy(),
                        provenance=samples.provenance[idx],
                    )
                )
            continue
        centroids = clustering.minibatch_kmeans(
            samples.latent, per_class, batch_size=batch_size, iters=iters, seed=[seed, label]
        )
        if mode == "nearest-real-pixel":
            for centroid in centroids:
                idx = nearest_real_pixel(centroid, samples)
                prototypes.append(
                    Prototype(
                        label=label,
                        latent=samples.latent[idx].copy(),
                        raw=samples.raw[idx].copy(),
                        provenance=samples.provenance[idx],
                    )
                )
        else:
            assign = clustering.assign_labels(samples.latent, centroids)
            for ci, centroid in enumerate(centroids):
                members = assign == ci
                if not members.any():
                    warnings.warn(
                        f"class {label}: centroid {ci} attracted no members, dropped"
                    )
                    continue
                prototypes.append(
                    Prototype(
                        label=label,
                        latent=centroid.copy(),
                        raw=samples.raw[members].mean(axis=0),
                        provenance=None,
                    )
                )
    return PrototypeBank(
        method=method,
        mode=mode,
        seed=seed,
        latent_dim=latent_dim,
        band_count=band_count,
        per_class=per_class,
        prototypes=prototypes,
    )


def _vote(dist, labels, k):
    """Vectorized majority vote over (Q, k) neighbor distances and labels.

    Winner is the class with the most neighbors; ties break to the class
    with the smaller summed distance among its neighbors, then to the lower
    class index. Returns (winner labels, confidences).
    """
    class_ids = np.arange(1, 4)
    onehot = labels[:, :, None] == class_ids[None, None, :]       # (Q, k, C)
    counts = onehot.sum(axis=1)                                    # (Q, C)
    dist_sums = (dist[:, :, None] * onehot).sum(axis=1)            # (Q, C)
    top = counts.max(axis=1, keepdims=True)
    contender = counts == top
    sums = np.where(contender, dist_sums, np.inf)
    best_sum = sums.min(axis=1, keepdims=True)
    winner_col = np.argmax(contender & (sums == best_sum), axis=1)
    return class_ids[winner_col], top[:, 0] / k


def classify_pixel(feature_vec, bank: PrototypeBank, k=DEFAULT_NEIGHBORS):
    """Label one latent vector; returns (class, confidence)."""
    dist, idx = _neighbors(np.asarray(feature_vec, dtype=np.float64)[None, :], bank, k)
    winners, confidence = _vote(dist, bank.label_vector[idx], k)
    return int(winners[0]), float(confidence[0])


def _neighbors(queries, bank, k):
    if len(bank) == 0:
        raise ValueError("prototype bank is empty")
    if not 1 <= k <= len(bank):
        raise ValueError(f"k must be in [1, {len(bank)}], got {k}")
    if queries.shape[1] != bank.latent_dim:
        raise ValueError(
            f"feature dim {queries.shape[1]} does not match bank D={bank.latent_dim}"
        )
    return kernels.knn_search(queries, bank.latent_matrix, k)


def segment_image(image: MultispectralImage, bank: PrototypeBank,
                  provider: ProviderSpec, k=DEFAULT_NEIGHBORS):
    """Classify every valid pixel; returns (class map, confidence map).

    Invalid pixels get label 0 and confidence 0. Results are identical to
    calling classify_pixel per pixel.
    """
    fmap = np.asarray(features(provider, image), dtype=np.float64)
    if fmap.shape[2] != bank.latent_dim:
        raise ValueError(
            f"provider emits D={fmap.shape[2]} but bank expects D={bank.latent_dim}"
        )
    height, width = fmap.shape[:2]
    labels = np.zeros((height, width), dtype=np.uint8)
    confidence = np.zeros((height, width), dtype=np.float64)
    valid = image.valid_mask
    if valid.any():
        queries = fmap[valid]
        dist, idx = _neighbors(queries, bank, k)
        winners, conf = _vote(dist, bank.label_vector[idx], k)
        labels[valid] = winners.astype(np.uint8)
        confidence[valid] = conf
    return labels, confidence


def explain_pixel(image: MultispectralImage, row, col, bank: PrototypeBank,
                  provider: ProviderSpec, k=DEFAULT_NEIGHBORS) -> PixelExplanation:
    """Neighbor-level evidence for the decision at one pixel."""
    if not (0 <= row < image.height and 0 <= col < image.width):
        raise ValueError(f"pixel ({row}, {col}) outside image {image.data.shape[:2]}")
    if not image.valid_mask[row, col]:
        raise ValueError(f"pixel ({row}, {col}) is invalid in image {image.image_id!r}")
    fmap = np.asarray(features(provider, image), dtype=np.float64)
    if fmap.shape[2] != bank.latent_dim:
        raise ValueError(
            f"provider emits D={fmap.shape[2]} but bank expects D={bank.latent_dim}"
        )
    dist, idx = _neighbors(fmap[row, col][None, :], bank, k)
    winners, confidence = _vote(dist, bank.label_vector[idx], k)
    neighbors = [
        NeighborInfo(
            distance=float(dist[0, j]),
            label=int(bank.prototypes[idx[0, j]].label),
            prototype_index=int(idx[0, j]),
            raw=bank.prototypes[idx[0, j]].raw,
            provenance=bank.prototypes[idx[0, j]].provenance,
        )
        for j in range(k)
    ]
    return PixelExplanation(
        row=int(row), col=int(col), neighbors=neighbors,
        label=int(winners[0]), confidence=float(confidence[0]),
    )


def project_prototypes_2d(bank: PrototypeBank) -> np.ndarray:
    """Deterministic 2-D view of the bank's latent vectors.

    Centers the latents and projects onto the top-2 eigenvectors of their
    covariance; each eigenvector's first nonzero coordinate is made
    positive so the output is reproducible. Returns (P, 2) coordinates.
    """
    if len(bank) < 2:
        raise ValueError("need at least two prototypes to project")
    latents = bank.latent_matrix
    centered = latents - latents.mean(axis=0)
    cov = centered.T @ centered / (latents.shape[0] - 1)
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1][:2]
    axes = eigvecs[:, order]
    for j in range(axes.shape[1]):
        nonzero = np.flatnonzero(np.abs(axes[:, j]) > 1e-12)
        if nonzero.size and axes[nonzero[0], j] < 0:
            axes[:, j] = -axes[:, j]
    coords = centered @ axes
    if coords.shape[1] < 2:
        coords = np.hstack([coords, np.zeros((coords.shape[0], 2 - coords.shape[1]))])
    return coords


def threshold_confidence(confidence_map, tau=DEFAULT_CONFIDENCE_THRESHOLD) -> np.ndarray:
    """High-confidence flags: confidence >= tau (so 8-of-10 at the default)."""
    if not 0.0 <= tau <= 1.0:
        raise ValueError(f"confidence threshold must lie in [0, 1], got {tau}")
    return np.asarray(confidence_map) >= tau
