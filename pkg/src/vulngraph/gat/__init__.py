from .losses import class_weights, focal_loss, weighted_ce
from .model import (
    ForwardTrace, Gradients, GraphInput, ModelConfig, ModelParams, NonFiniteError,
    backward, edge_embeddings, forward, init_params, param_shapes,
)
from .optim import AdamState, adam_step
from .train import History, PlateauController, TrainConfig, evaluate, predict, train

__all__ = [
    "AdamState", "ForwardTrace", "Gradients", "GraphInput", "History", "ModelConfig",
    "ModelParams", "NonFiniteError", "PlateauController", "TrainConfig", "adam_step",
    "backward", "class_weights", "edge_embeddings", "evaluate", "focal_loss", "forward",
    "init_params", "param_shapes", "predict", "train", "weighted_ce",
]
