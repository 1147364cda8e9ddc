"""Feature providers: turn an image into the (H, V, D) map the classifier sees.

The identity provider hands back the raw bands (D = n); the file provider
reads latent maps exported by offline tooling, one tensor per image id, so
no neural network ever runs inside this package.
"""

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import tensorfile
from .rasters import MultispectralImage

FEATURE_SUFFIX = ".features.imtf"


@dataclass(frozen=True)
class ProviderSpec:
    kind: str                    # "identity" | "file"
    directory: Path | None = None

    def __post_init__(self):
        if self.kind not in ("identity", "file"):
            raise ValueError(f"unknown provider kind {self.kind!r}")
        if self.kind == "file" and self.directory is None:
            raise ValueError("file provider needs a directory")


def provider_from_arg(arg: str) -> ProviderSpec:
    """CLI form: the literal string "identity" or a feature directory path."""
    if arg == "identity":
        return ProviderSpec(kind="identity")
    return ProviderSpec(kind="file", directory=Path(arg))


def feature_path(directory, image_id: str) -> Path:
    return Path(directory) / f"{image_id}{FEATURE_SUFFIX}"


def features(spec: ProviderSpec, image: MultispectralImage) -> np.ndarray:
    """Feature map for `image`; pure, so repeated calls return equal maps."""
    if spec.kind == "identity":
        return image.data
    path = feature_path(spec.directory, image.image_id)
    if not path.exists():
        raise FileNotFoundError(f"no feature tensor for image {image.image_id!r} at {path}")
    fmap = tensorfile.read_tensor(path)
    if fmap.ndim != 3:
        raise ValueError(f"{path}: feature tensors are rank-3, got rank {fmap.ndim}")
    if fmap.shape[:2] != image.data.shape[:2]:
        raise ValueError(
            f"{path}: feature dims {fmap.shape[:2]} do not match image "
            f"{image.data.shape[:2]}"
        )
    if not np.isfinite(fmap[image.valid_mask]).all():
        raise ValueError(f"{path}: non-finite features at valid pixels")
    return fmap
