"""
Data models for the model zoo.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Tuple

from src.datasets.models import DatasetProfile
from src.nn.network import Network
from src.utils.config import SUPPORTED_ARCHITECTURES
from src.utils.exceptions import ZooError


@dataclass(frozen=True)
class ZooEntry:
    """
    Attributes:
        arch_id: Architecture identifier.
        network: Trained network.
        accuracy: Held-out accuracy in [0, 1].
    """
    arch_id: str
    network: Network
    accuracy: float


@dataclass(frozen=True)
class ModelZoo:
    """
    Trained models sharing one dataset profile.

    Entries keep their construction order; that order defines role enumeration.

    Raises:
        ZooError: If two entries share an architecture id or a network does not fit the profile.
    """
    profile: DatasetProfile
    entries: Tuple[ZooEntry, ...]
    _index: Dict[str, ZooEntry] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "entries", tuple(self.entries))
        index: Dict[str, ZooEntry] = {}
        for entry in self.entries:
            if entry.arch_id in index:
                raise ZooError(f"Duplicate architecture id '{entry.arch_id}' in zoo")
            if entry.network.input_shape != tuple(self.profile.shape) or entry.network.num_classes != self.profile.num_classes:
                raise ZooError(f"Model '{entry.arch_id}' does not match dataset profile {self.profile.name}")
            index[entry.arch_id] = entry
        object.__setattr__(self, "_index", index)

    @property
    def ids(self) -> List[str]:
        return [e.arch_id for e in self.entries]

    def get(self, arch_id: str) -> Network:
        """
        Raises:
            ZooError: If the id is not in the zoo.
        """
        if arch_id not in self._index:
            raise ZooError(f"Model '{arch_id}' is not in the zoo. Available: {', '.join(self.ids)}")
        return self._index[arch_id].network

    def accuracy(self, arch_id: str) -> float:
        self.get(arch_id)
        return self._index[arch_id].accuracy

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, arch_id: object) -> bool:
        return arch_id in self._index


@dataclass(frozen=True)
class ZooConfig:
    """
    Zoo training settings.

    Attributes:
        architectures: Architecture ids to train, in zoo order.
        epochs: Maximum epochs per model.
        lr: SGD learning rate.
        batch_size: Mini-batch size.
        min_accuracy: Held-out accuracy floor; training stops early once reached.
        seed: Master seed for initialisation and shuffling.
    """
    architectures: Tuple[str, ...] = tuple(SUPPORTED_ARCHITECTURES)
    epochs: int = 40
    lr: float = 0.05
    batch_size: int = 32
    min_accuracy: float = 0.85
    seed: int = 0


@dataclass(frozen=True)
class RoleAssignment:
    """
    Victim f, surrogate f' and ranking set F drawn from one zoo.

    Attributes:
        victim: Id of the attacked (black-box) model.
        surrogate: Id of the model adversarial examples are crafted on.
        ranking: Ids of the models used only for scoring.
    """
    victim: str
    surrogate: str
    ranking: Tuple[str, ...]

    def __post_init__(self) -> None:
        ids = [self.victim, self.surrogate, *self.ranking]
        if len(set(ids)) != len(ids):
            raise ZooError(f"Role assignment must partition distinct models, got {ids}")

    @property
    def pair_id(self) -> str:
        return f"{self.victim}|{self.surrogate}"
