"""
Network Package

Marker-features-to-coefficients perceptron, its physics-informed loss,
training loop, inference and model files.
"""

from .inference import InferenceResult, Reconstructor, infer
from .loss import PhysicsLoss, loss, loss_gradient
from .model import MlpModel, forward, init_model, silu
from .serialization import load_model, save_model
from .training import Adam, TrainReport, train

__all__ = [
    "Adam",
    "InferenceResult",
    "MlpModel",
    "PhysicsLoss",
    "Reconstructor",
    "TrainReport",
    "forward",
    "infer",
    "init_model",
    "load_model",
    "loss",
    "loss_gradient",
    "save_model",
    "silu",
    "train",
]
