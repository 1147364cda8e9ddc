"""Illustrative 2-D embedding plots of prototype banks."""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from floodkit.prototypes import PrototypeBank
from floodkit.rasters import CLASS_NAMES
from floodkit.render import PALETTE

try:
    from umap import UMAP
except ImportError:
    UMAP = None


def embed_latents(latents: np.ndarray, seed=0) -> np.ndarray:
    """Nonlinear 2-D embedding; UMAP when installed, t-SNE otherwise."""
    if UMAP is not None:
        return UMAP(n_components=2, random_state=seed).fit_transform(latents)
    from sklearn.manifold import TSNE

    perplexity = min(30.0, max(2.0, (latents.shape[0] - 1) / 3))
    return TSNE(
        n_components=2, random_state=seed, perplexity=perplexity, init="pca"
    ).fit_transform(latents)


def plot_prototype_embedding(bank_path, out_png, seed=0) -> np.ndarray:
    """Scatter the bank's latents in 2-D, colored by class; returns coords."""
    bank = PrototypeBank.load(bank_path)
    coords = embed_latents(bank.latent_matrix, seed=seed)
    labels = bank.label_vector
    fig, ax = plt.subplots(figsize=(6, 6))
    for label in sorted(set(labels.tolist())):
        where = labels == label
        color = tuple(c / 255 for c in PALETTE[label])
        ax.scatter(
            coords[where, 0], coords[where, 1],
            s=14, color=color, label=CLASS_NAMES[label], edgecolors="none",
        )
    ax.set_title(f"{len(bank)} prototypes ({bank.method}, {bank.mode})")
    ax.legend()
    fig.tight_layout()
    fig.savefig(Path(out_png), dpi=150)
    plt.close(fig)
    return coords
