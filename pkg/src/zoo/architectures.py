"""
The five zoo architectures.

They differ in depth, width, kernel size and pooling so that transfer
between them is imperfect, which is what the ranking experiments need.
``mlp`` has no convolutions at all.
"""

from typing import Any, Callable, Dict, List

from src.datasets.models import DatasetProfile
from src.nn.network import Network
from src.utils.config import SUPPORTED_ARCHITECTURES
from src.utils.exceptions import ZooError

LayerConfigs = List[Dict[str, Any]]


def _cnn_a(c: int, h: int, w: int, k: int) -> LayerConfigs:
    return [
        {"kind": "conv", "in_channels": c, "out_channels": 8, "kernel_size": 3, "padding": 1},
        {"kind": "relu"},
        {"kind": "maxpool", "size": 2},
        {"kind": "conv", "in_channels": 8, "out_channels": 16, "kernel_size": 3, "padding": 1},
        {"kind": "relu"},
        {"kind": "maxpool", "size": 2},
        {"kind": "flatten"},
        {"kind": "dense", "in_features": 16 * (h // 4) * (w // 4), "out_features": k},
    ]


def _cnn_b(c: int, h: int, w: int, k: int) -> LayerConfigs:
    return [
        {"kind": "conv", "in_channels": c, "out_channels": 6, "kernel_size": 5, "padding": 2},
        {"kind": "relu"},
        {"kind": "maxpool", "size": 2},
        {"kind": "conv", "in_channels": 6, "out_channels": 12, "kernel_size": 3, "padding": 1},
        {"kind": "relu"},
        {"kind": "maxpool", "size": 2},
        {"kind": "flatten"},
        {"kind": "dense", "in_features": 12 * (h // 4) * (w // 4), "out_features": 32},
        {"kind": "relu"},
        {"kind": "dense", "in_features": 32, "out_features": k},
    ]


def _cnn_wide(c: int, h: int, w: int, k: int) -> LayerConfigs:
    return [
        {"kind": "conv", "in_channels": c, "out_channels": 24, "kernel_size": 3, "padding": 1},
        {"kind": "relu"},
        {"kind": "maxpool", "size": 2},
        {"kind": "flatten"},
        {"kind": "dense", "in_features": 24 * (h // 2) * (w // 2), "out_features": k},
    ]


def _mlp(c: int, h: int, w: int, k: int) -> LayerConfigs:
    return [
        {"kind": "flatten"},
        {"kind": "dense", "in_features": c * h * w, "out_features": 64},
        {"kind": "relu"},
        {"kind": "dense", "in_features": 64, "out_features": 32},
        {"kind": "relu"},
        {"kind": "dense", "in_features": 32, "out_features": k},
    ]


def _cnn_pool(c: int, h: int, w: int, k: int) -> LayerConfigs:
    return [
        {"kind": "conv", "in_channels": c, "out_channels": 8, "kernel_size": 3, "padding": 1},
        {"kind": "relu"},
        {"kind": "maxpool", "size": 2},
        {"kind": "conv", "in_channels": 8, "out_channels": 16, "kernel_size": 3, "padding": 1},
        {"kind": "relu"},
        {"kind": "maxpool", "size": 2},
        {"kind": "conv", "in_channels": 16, "out_channels": 32, "kernel_size": 3, "padding": 1},
        {"kind": "relu"},
        {"kind": "gap"},
        {"kind": "dense", "in_features": 32, "out_features": k},
    ]


ARCHITECTURES: Dict[str, Callable[[int, int, int, int], LayerConfigs]] = {
    "cnn-a": _cnn_a,
    "cnn-b": _cnn_b,
    "cnn-wide": _cnn_wide,
    "mlp": _mlp,
    "cnn-pool": _cnn_pool,
}


def build_architecture(arch_id: str, profile: DatasetProfile, seed: int = 0) -> Network:
    """
    Build an untrained network for a dataset profile.

    Args:
        arch_id: One of "cnn-a", "cnn-b", "cnn-wide", "mlp", "cnn-pool".
        profile: Dataset profile providing input shape and class count.
        seed: Initialisation seed.

    Returns:
        Network: Freshly initialised network whose output length is K.

    Raises:
        ZooError: If the architecture id is unknown.
    """
    if arch_id not in ARCHITECTURES:
        raise ZooError(f"Unknown architecture '{arch_id}'. Valid ids: {', '.join(SUPPORTED_ARCHITECTURES)}")
    c, h, w = profile.shape
    layers = ARCHITECTURES[arch_id](c, h, w, profile.num_classes)
    return Network.from_layer_configs(arch_id, profile.shape, profile.num_classes, layers, seed=seed)
