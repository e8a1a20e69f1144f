"""
Victim-correct evaluation pools and attack success rates.
"""

from typing import List, Sequence, Tuple

import numpy as np

from src.nn.functional import predict
from src.nn.network import Network
from src.nn.tensor import LabeledSample, stack_samples
from src.utils.common_functions import derive_rng
from src.utils.exceptions import PoolError
from src.utils.logger import get_logger

logger = get_logger(__name__)

POOL_BATCH = 256


def victim_fooled(victim: Network, images: np.ndarray, labels: Sequence[int]) -> np.ndarray:
    """Boolean vector: True where arg-max of the victim differs from the label."""
    batch = np.asarray(images)
    if len(batch) == 0:
        return np.zeros((0,), dtype=bool)
    predictions = np.concatenate([
        np.atleast_1d(predict(victim, batch[start:start + POOL_BATCH]))
        for start in range(0, len(batch), POOL_BATCH)
    ])
    return predictions != np.asarray(labels, dtype=np.int64)


def asr(victim: Network, adversarials: Sequence[Tuple[np.ndarray, int]]) -> float:
    """
    Attack success rate: fraction of (x*, y) pairs the victim misclassifies.

    An empty list has ASR 0.0.
    """
    if not adversarials:
        return 0.0
    images = np.stack([np.asarray(x) for x, _ in adversarials])
    labels = [int(y) for _, y in adversarials]
    return float(np.mean(victim_fooled(victim, images, labels)))


def build_pool(victim: Network, test_data: Sequence[LabeledSample], size: int, seed: int) -> List[LabeledSample]:
    """
    Seeded subsample of ``size`` test samples the victim classifies correctly.

    The test split is visited in a permutation drawn from ``seed``; the pool is the
    first ``size`` correct samples in that order, so a perfect victim gets the first
    ``size`` seeded picks.

    Raises:
        PoolError: If fewer than ``size`` correct samples exist.
    """
    if size < 0:
        raise PoolError(f"Pool size must be >= 0, got {size}")
    if size == 0:
        return []
    order = derive_rng(seed, "pool").permutation(len(test_data))
    images, labels = stack_samples([test_data[i] for i in order])
    if len(labels) == 0:
        raise PoolError(f"Pool of {size} requested from an empty test split")
    correct = ~victim_fooled(victim, images, labels)
    available = int(correct.sum())
    if available < size:
        raise PoolError(
            f"Only {available} of {len(labels)} test samples are classified correctly by the victim; "
            f"pool size {size} requested"
        )
    picks = np.flatnonzero(correct)[:size]
    logger.debug("Pool of %d drawn from %d correct samples", size, available)
    return [test_data[int(order[i])] for i in picks]
