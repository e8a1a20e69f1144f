"""
Zoo training, evaluation and role enumeration.
"""

from concurrent.futures import ThreadPoolExecutor
from itertools import permutations
from typing import List, Optional, Sequence, Tuple

import numpy as np

from src.datasets.models import DatasetProfile
from src.nn.functional import forward
from src.nn.network import Network
from src.nn.tensor import LabeledSample, stack_samples
from src.nn.training import TrainConfig, train_epoch
from src.utils.common_functions import derive_seed
from src.utils.config import get_workers
from src.utils.exceptions import ZooError, ZooTrainingError
from src.utils.logger import get_logger
from src.zoo.architectures import build_architecture
from src.zoo.models import ModelZoo, RoleAssignment, ZooConfig, ZooEntry

logger = get_logger(__name__)

EVAL_BATCH = 256


def evaluate_accuracy(net: Network, data: Sequence[LabeledSample]) -> float:
    """
    Fraction of samples whose arg-max logit equals the label.

    Raises:
        ZooError: If data is empty.
    """
    if not data:
        raise ZooError("Cannot evaluate accuracy on an empty dataset")
    images, labels = stack_samples(data)
    correct = 0
    for start in range(0, len(labels), EVAL_BATCH):
        logits = forward(net, images[start:start + EVAL_BATCH])
        correct += int(np.sum(np.argmax(logits, axis=1) == labels[start:start + EVAL_BATCH]))
    return correct / len(labels)


def _train_one(
    arch_id: str,
    profile: DatasetProfile,
    train: Sequence[LabeledSample],
    heldout: Sequence[LabeledSample],
    config: ZooConfig,
) -> Tuple[ZooEntry, bool]:
    init_seed = int(derive_seed(config.seed, "init", arch_id).generate_state(1)[0])
    net = build_architecture(arch_id, profile, seed=init_seed)
    accuracy = 0.0
    for epoch in range(config.epochs):
        epoch_seed = int(derive_seed(config.seed, "shuffle", arch_id, epoch).generate_state(1)[0])
        net, loss = train_epoch(net, train, TrainConfig(lr=config.lr, batch_size=config.batch_size, seed=epoch_seed))
        accuracy = evaluate_accuracy(net, heldout)
        logger.debug("[%s] epoch %d/%d loss=%.4f acc=%.3f", arch_id, epoch + 1, config.epochs, loss, accuracy)
        if accuracy >= config.min_accuracy:
            logger.info("✅ %s reached %.3f held-out accuracy after %d epochs", arch_id, accuracy, epoch + 1)
            return ZooEntry(arch_id, net, accuracy), True
    logger.warning("❌ %s stopped at %.3f held-out accuracy (floor %.2f)", arch_id, accuracy, config.min_accuracy)
    return ZooEntry(arch_id, net, accuracy), False


def train_zoo(
    profile: DatasetProfile,
    train: Sequence[LabeledSample],
    heldout: Sequence[LabeledSample],
    config: ZooConfig,
    workers: Optional[int] = None,
) -> ModelZoo:
    """
    Train every configured architecture on the same data, in parallel.

    Each model trains until it reaches ``config.min_accuracy`` on the held-out
    split or runs out of epochs.

    Args:
        profile: Dataset profile.
        train: Shared training set.
        heldout: Held-out split every accuracy is measured on.
        config: Architectures and training hyperparameters.
        workers: Thread-pool size (defaults to get_workers()).

    Returns:
        ModelZoo: The trained zoo.

    Raises:
        ZooError: If the training or held-out data is empty.
        ZooTrainingError: If any model misses the accuracy floor (names the failures).
    """
    if not train:
        raise ZooError("train_zoo requires non-empty training data")
    if not heldout:
        raise ZooError("train_zoo requires a non-empty held-out split")
    archs = list(config.architectures)
    logger.info("Training %d models on %d samples (%s)", len(archs), len(train), ", ".join(archs))
    with ThreadPoolExecutor(max_workers=max(1, min(workers or get_workers(), len(archs)))) as executor:
        futures = [
            executor.submit(_train_one, arch_id, profile, train, heldout, config)
            for arch_id in archs
        ]
        results = [f.result() for f in futures]

    failed = [entry for entry, ok in results if not ok]
    if failed:
        details = ", ".join(f"{e.arch_id} ({e.accuracy:.3f})" for e in failed)
        raise ZooTrainingError(
            f"Models below the accuracy floor {config.min_accuracy:.2f}: {details}",
            failed=[e.arch_id for e in failed],
        )
    return ModelZoo(profile=profile, entries=tuple(entry for entry, _ in results))


def enumerate_roles(zoo: ModelZoo) -> List[RoleAssignment]:
    """
    Every ordered (victim, surrogate) pair with the remaining models as ranking set.

    A zoo of m models yields m * (m - 1) assignments, ordered by victim then
    surrogate in zoo order.

    Raises:
        ZooError: If the zoo has fewer than 3 models (the ranking set would be empty).
    """
    ids = zoo.ids
    if len(ids) < 3:
        raise ZooError(f"Role enumeration needs at least 3 models, the zoo has {len(ids)}")
    return [
        RoleAssignment(victim=v, surrogate=s, ranking=tuple(m for m in ids if m not in (v, s)))
        for v, s in permutations(ids, 2)
    ]
