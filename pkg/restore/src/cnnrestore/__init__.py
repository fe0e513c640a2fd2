"""CT slice restoration with a densely connected residual U-Net."""

from .checkpoint import load_checkpoint, save_checkpoint
from .data import TrainingPair, augment, normalize_pair, pairs_from_volumes
from .model import DenseBlock, NetworkConfig, RestorationNet, build_network, shape_ledger
from .train import TrainingConfig, restore, train

__all__ = [
    "NetworkConfig",
    "TrainingConfig",
    "TrainingPair",
    "DenseBlock",
    "RestorationNet",
    "build_network",
    "shape_ledger",
    "train",
    "restore",
    "augment",
    "normalize_pair",
    "pairs_from_volumes",
    "save_checkpoint",
    "load_checkpoint",
]
