"""Minimal numpy CNN engine that executes LayerGraphs, fixed blur layers included."""

from .data import Dataset, make_dataset, train_test_split
from .model import Model, micro_resnet
from .train import TrainConfig, TrainingDiverged, accuracy, train

__all__ = [
    "Dataset",
    "Model",
    "TrainConfig",
    "TrainingDiverged",
    "accuracy",
    "make_dataset",
    "micro_resnet",
    "train",
    "train_test_split",
]
