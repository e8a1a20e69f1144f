"""
Mini-batch SGD training.
"""

from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from src.nn.functional import parameter_gradients
from src.nn.network import Network
from src.nn.tensor import LabeledSample, stack_samples
from src.utils.exceptions import NumericalError, ShapeError
from src.utils.logger import get_logger

logger = get_logger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    """
    Attributes:
        lr: Learning rate (0 leaves parameters untouched).
        batch_size: Mini-batch size.
        seed: Shuffling seed for the epoch.
    """
    lr: float = 0.05
    batch_size: int = 32
    seed: int = 0


def train_epoch(net: Network, data: Sequence[LabeledSample], config: TrainConfig) -> Tuple[Network, float]:
    """
    Run one epoch of plain SGD (fixed learning rate, no momentum).

    The input network is not modified; a new network is returned.

    Args:
        net: Network to train.
        data: Training samples.
        config: Learning rate, batch size and shuffling seed.

    Returns:
        (trained network, mean training loss over the epoch)

    Raises:
        ShapeError: If data is empty or the configuration is invalid.
        NumericalError: If the loss or any parameter becomes non-finite.
    """
    if not data:
        raise ShapeError("train_epoch requires a non-empty dataset")
    if config.lr < 0 or config.batch_size < 1:
        raise ShapeError(f"Invalid training config: lr={config.lr}, batch_size={config.batch_size}")

    images, labels = stack_samples(data)
    order = np.random.default_rng(config.seed).permutation(len(data))
    # private copy, updated in place batch by batch
    current = net.copy()
    total_loss = 0.0

    for start in range(0, len(order), config.batch_size):
        idx = order[start:start + config.batch_size]
        loss, grads = parameter_gradients(current, images[idx], labels[idx])
        if not np.isfinite(loss):
            raise NumericalError(f"Non-finite training loss for '{net.arch_id}' at batch offset {start}")
        total_loss += loss * len(idx)
        for layer, layer_grads in zip(current.layers, grads):
            for name, value in layer.params.items():
                value -= (config.lr * layer_grads[name]).astype(value.dtype)

    if not current.all_finite():
        raise NumericalError(f"Parameters of '{net.arch_id}' became non-finite during training")
    mean_loss = total_loss / len(order)
    logger.debug("Epoch done for %s: mean loss %.4f", net.arch_id, mean_loss)
    return current, mean_loss
