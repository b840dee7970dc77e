"""Minimal trainable detector used to exercise the full pipeline."""

from .checkpoint import Checkpoint, load as load_checkpoint, save as save_checkpoint
from .model import NetSpec, TinySSD
from .synth import CLASSES, synth_dataset, synth_image
from .train import SGD, TrainConfig, TrainResult, evaluate_model, predict, sgd_step, train

__all__ = [
    "Checkpoint", "load_checkpoint", "save_checkpoint", "NetSpec", "TinySSD", "CLASSES",
    "synth_dataset", "synth_image", "SGD", "TrainConfig", "TrainResult", "evaluate_model",
    "predict", "sgd_step", "train",
]
