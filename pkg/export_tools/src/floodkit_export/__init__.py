"""Offline tooling around floodkit: dataset conversion, feature export, plots."""

__version__ = "0.1.0"

from .datasets import ConversionJob, convert_dataset
from .embedding import plot_prototype_embedding
from .readers import read_scene

__all__ = [
    "ConversionJob",
    "convert_dataset",
    "plot_prototype_embedding",
    "read_scene",
]
