"""Compact numpy tensor engine and the four super-resolution networks."""

from .network import ArchitectureSpec, LayerSpec, Network, build_architecture
from .train import TrainConfig, TrainingDiverged, train
from .checkpoint import load_checkpoint, save_checkpoint
from .gradcheck import grad_check
from .infer import super_resolve

__all__ = [
    "ArchitectureSpec",
    "LayerSpec",
    "Network",
    "build_architecture",
    "TrainConfig",
    "TrainingDiverged",
    "train",
    "load_checkpoint",
    "save_checkpoint",
    "grad_check",
    "super_resolve",
]
