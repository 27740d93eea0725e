"""Numpy convolutional network that predicts the normalized AMG cost."""
from amgtune.surrogate.data import build_batch, split_batches
from amgtune.surrogate.io import ModelFileError, load_model, save_model
from amgtune.surrogate.net import EXTRA_FEATURES, ArchitectureSpec, Batch, SurrogateModel, extra_features
from amgtune.surrogate.train import AdamW, TrainConfig, train, write_history

__all__ = [
    "AdamW",
    "ArchitectureSpec",
    "Batch",
    "EXTRA_FEATURES",
    "ModelFileError",
    "SurrogateModel",
    "TrainConfig",
    "build_batch",
    "extra_features",
    "load_model",
    "save_model",
    "split_batches",
    "train",
    "write_history",
]
