"""
Experiment configuration: parsing, defaults and the config hash.
"""

import copy
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

from src.attacks.models import DEFAULT_EPSILON, AttackSpec
from src.augment.presets import AUGMENTATION_KINDS, AugmentationPreset, get_preset
from src.datasets.models import SyntheticSpec
from src.utils.common_functions import PathLike, read_yml
from src.utils.config import SUPPORTED_ARCHITECTURES, get_output_root
from src.utils.config_validator import validate_and_raise
from src.utils.exceptions import AttackConfigError, AugmentationError, ConfigError, DatasetError
from src.zoo.models import ZooConfig

DEFAULT_POOL_SIZE = 200
DEFAULT_N = 50
DEFAULT_STRATEGIES = ("baseline", "vanilla", "top1-adversarial")
DEFAULT_N_VALUES = (1, 5, 10, 20, 50)
DEFAULT_EPSILON_VALUES = (1.0 / 255.0, 2.0 / 255.0, 4.0 / 255.0, 8.0 / 255.0)
DEFAULT_MIN_ACCURACY = {"synthetic": 0.85}
FILE_MIN_ACCURACY = 0.6

# fields that do not change results
NON_SEMANTIC_FIELDS = ("output_dir", "workers")


@dataclass(frozen=True)
class DatasetSection:
    """
    Attributes:
        name: Name written to reports.
        format: One of SUPPORTED_FORMATS.
        path: Dataset location (unused for synthetic).
        preset: Augmentation preset; None picks it from the image size.
        classes: Class count of an on-disk dataset; None derives it from the largest label.
        synthetic: Generator settings for the synthetic format.
    """
    name: str = "synthetic"
    format: str = "synthetic"
    path: Optional[str] = None
    preset: Optional[str] = None
    classes: Optional[int] = None
    synthetic: SyntheticSpec = field(default_factory=SyntheticSpec)


@dataclass(frozen=True)
class SweepGrids:
    n_values: Tuple[int, ...] = DEFAULT_N_VALUES
    epsilon_values: Tuple[float, ...] = DEFAULT_EPSILON_VALUES
    augmentations: Tuple[str, ...] = AUGMENTATION_KINDS


@dataclass(frozen=True)
class ExperimentConfig:
    """
    Everything one experiment run depends on.

    ``epsilon`` and the attack's preset-dependent defaults are resolved once
    the dataset's preset is known (see ``resolved_epsilon`` and ``attack_spec``).
    """
    dataset: DatasetSection = field(default_factory=DatasetSection)
    zoo_dir: str = ""
    zoo: ZooConfig = field(default_factory=ZooConfig)
    pool_size: int = DEFAULT_POOL_SIZE
    epsilon: Optional[float] = None
    n: int = DEFAULT_N
    samplings: Tuple[str, ...] = ("S2",)
    strategies: Tuple[str, ...] = DEFAULT_STRATEGIES
    attack: Dict[str, Any] = field(default_factory=dict)
    attacks: Tuple[str, ...] = ("pgd",)
    sweeps: SweepGrids = field(default_factory=SweepGrids)
    augmentation: Dict[str, Any] = field(default_factory=dict)
    bootstrap_resamples: int = 1000
    confidence: float = 0.95
    seed: int = 0
    output_dir: str = ""
    workers: Optional[int] = None
    dump_candidates: bool = False

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ExperimentConfig":
        """
        Validate and build a config from its mapping form.

        Raises:
            ConfigError: With one message per invalid field.
        """
        validate_and_raise(data)
        raw = copy.deepcopy(data)
        dataset = dict(raw.get("dataset", {}))
        fmt = dataset.get("format", "synthetic")
        zoo = dict(raw.get("zoo", {}))
        attack = dict(raw.get("attack", {}))
        sweeps = raw.get("sweeps", {})
        bootstrap = raw.get("bootstrap", {})
        output_dir = raw.get("output_dir") or get_output_root()
        try:
            synthetic = SyntheticSpec.from_dict(dataset.get("synthetic", {}))
            zoo_config = ZooConfig(
                architectures=tuple(zoo.get("architectures", SUPPORTED_ARCHITECTURES)),
                epochs=zoo.get("epochs", 40),
                lr=zoo.get("lr", 0.05),
                batch_size=zoo.get("batch_size", 32),
                min_accuracy=zoo.get("min_accuracy", DEFAULT_MIN_ACCURACY.get(fmt, FILE_MIN_ACCURACY)),
                seed=zoo.get("seed", 0),
            )
        except DatasetError as e:
            raise ConfigError(f"dataset.synthetic: {e}", cause=e) from e
        config = cls(
            dataset=DatasetSection(
                name=dataset.get("name", fmt),
                format=fmt,
                path=dataset.get("path"),
                preset=dataset.get("preset"),
                classes=dataset.get("classes"),
                synthetic=synthetic,
            ),
            zoo_dir=zoo.get("dir") or str(Path(output_dir) / "zoo"),
            zoo=zoo_config,
            pool_size=raw.get("pool_size", DEFAULT_POOL_SIZE),
            epsilon=raw.get("epsilon"),
            n=raw.get("n", DEFAULT_N),
            samplings=tuple(raw.get("samplings", ("S2",))),
            strategies=tuple(raw.get("strategies", DEFAULT_STRATEGIES)),
            attack=attack,
            attacks=tuple(raw.get("attacks", (attack.get("algorithm", "pgd"),))),
            sweeps=SweepGrids(
                n_values=tuple(sweeps.get("n_values", DEFAULT_N_VALUES)),
                epsilon_values=tuple(float(e) for e in sweeps.get("epsilon_values", DEFAULT_EPSILON_VALUES)),
                augmentations=tuple(sweeps.get("augmentations", AUGMENTATION_KINDS)),
            ),
            augmentation=dict(raw.get("augmentation", {})),
            bootstrap_resamples=bootstrap.get("resamples", 1000),
            confidence=float(bootstrap.get("confidence", 0.95)),
            seed=raw.get("seed", 0),
            output_dir=output_dir,
            workers=raw.get("workers"),
            dump_candidates=raw.get("dump_candidates", False),
        )
        # fail on bad attack or augmentation fields before any side effect
        config.attack_spec("low-res")
        config.augmentation_preset("low-res")
        return config

    @classmethod
    def from_file(cls, path: PathLike, overrides: Optional[Dict[str, Any]] = None) -> "ExperimentConfig":
        """Load a JSON/YAML config file and apply flag overrides on top of it."""
        data = read_yml(path)
        return cls.from_dict(merge_overrides(data, overrides or {}))

    def to_dict(self) -> Dict[str, Any]:
        """Resolved, JSON-ready form (used in reports and for the config hash)."""
        return {
            "dataset": {
                "name": self.dataset.name,
                "format": self.dataset.format,
                "path": self.dataset.path,
                "preset": self.dataset.preset,
                "classes": self.dataset.classes,
                "synthetic": {
                    "classes": self.dataset.synthetic.classes,
                    "shape": list(self.dataset.synthetic.shape),
                    "per_class": self.dataset.synthetic.per_class,
                    "test_per_class": self.dataset.synthetic.test_per_class,
                    "noise": self.dataset.synthetic.noise,
                    "seed": self.dataset.synthetic.seed,
                },
            },
            "zoo": {
                "dir": self.zoo_dir,
                "architectures": list(self.zoo.architectures),
                "epochs": self.zoo.epochs,
                "lr": self.zoo.lr,
                "batch_size": self.zoo.batch_size,
                "min_accuracy": self.zoo.min_accuracy,
                "seed": self.zoo.seed,
            },
            "pool_size": self.pool_size,
            "epsilon": self.epsilon,
            "n": self.n,
            "samplings": list(self.samplings),
            "strategies": list(self.strategies),
            "attack": self._attack_dict(),
            "attacks": list(self.attacks),
            "sweeps": {
                "n_values": list(self.sweeps.n_values),
                "epsilon_values": list(self.sweeps.epsilon_values),
                "augmentations": list(self.sweeps.augmentations),
            },
            "augmentation": self.augmentation,
            "bootstrap": {"resamples": self.bootstrap_resamples, "confidence": self.confidence},
            "seed": self.seed,
            "output_dir": self.output_dir,
            "workers": self.workers,
            "dump_candidates": self.dump_candidates,
        }

    @property
    def config_hash(self) -> str:
        """SHA-256 of the canonical JSON of every field that can change results."""
        data = self.to_dict()
        for key in NON_SEMANTIC_FIELDS:
            data.pop(key, None)
        canonical = json.dumps(data, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    def _attack_dict(self) -> Dict[str, Any]:
        # defaults resolved against the declared preset (low-res when undeclared); epsilon is top-level
        data = AttackSpec.from_dict(dict(self.attack), self.dataset.preset or "low-res").to_dict()
        data.pop("epsilon", None)
        return data

    def resolved_epsilon(self, preset: str) -> float:
        return float(self.epsilon) if self.epsilon is not None else DEFAULT_EPSILON.get(preset, 2.0 / 255.0)

    def attack_spec(self, preset: str, algorithm: Optional[str] = None) -> AttackSpec:
        """
        Build the base attack for ``algorithm`` (the configured one by default).

        Raises:
            ConfigError: If the attack section is invalid.
        """
        data = dict(self.attack)
        if algorithm is not None:
            data["algorithm"] = algorithm
        data["epsilon"] = self.resolved_epsilon(preset)
        try:
            return AttackSpec.from_dict(data, preset)
        except AttackConfigError as e:
            raise ConfigError(f"attack: {e}", cause=e) from e

    def augmentation_preset(self, preset: str) -> AugmentationPreset:
        """
        Raises:
            ConfigError: If an augmentation override is invalid.
        """
        try:
            return get_preset(preset).with_overrides(self.augmentation)
        except AugmentationError as e:
            raise ConfigError(f"augmentation: {e}", cause=e) from e


def merge_overrides(data: Dict[str, Any], overrides: Dict[str, Any]) -> Dict[str, Any]:
    """
    Apply flag overrides to a config mapping.

    Override keys may be dotted ("zoo.dir", "attack.steps"); None values are skipped.
    """
    merged = copy.deepcopy(data)
    for dotted, value in overrides.items():
        if value is None:
            continue
        target = merged
        *parents, leaf = dotted.split(".")
        for key in parents:
            target = target.setdefault(key, {})
        target[leaf] = value
    return merged


def load_config(path: Optional[PathLike], overrides: Optional[Dict[str, Any]] = None) -> ExperimentConfig:
    """Config from ``path`` (or built-in defaults when None) with overrides applied."""
    if path is None:
        return ExperimentConfig.from_dict(merge_overrides({}, overrides or {}))
    return ExperimentConfig.from_file(path, overrides)
