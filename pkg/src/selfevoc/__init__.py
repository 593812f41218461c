"""Fuzzy self-evolving clustering.

An autoencoder embeds the data, fuzzy c-means seeds the clusters, and each
outer iteration trains a classifier on the most confident, cleaned and
augmented members of every cluster. Its predictions then become the target
that the embedding and centers are pulled toward.
"""
from .config import ConfigError, RunConfig, load_config
from .dataset import Dataset, DatasetError, load_csv, load_idx, synth_blobs
from .metrics import acc, ari, evaluate, nmi
from .numerics import ContractError
from .training import RunError, RunResult, run

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "ContractError", "Dataset", "DatasetError", "RunConfig", "RunError",
    "RunResult", "acc", "ari", "evaluate", "load_config", "load_csv", "load_idx", "nmi",
    "run", "synth_blobs", "__version__",
]
