"""
Data models for attacks: specifications and results.
"""

from dataclasses import asdict, dataclass, field, replace
from typing import Any, Dict, Optional, Tuple

import numpy as np

from src.nn.tensor import ImageTensor
from src.utils.config import ATTACK_ALGORITHMS, EXTERNAL_MODES
from src.utils.exceptions import AttackConfigError

ALGORITHMS = tuple(ATTACK_ALGORITHMS)
QUERY_ALGORITHMS = ("simba",)

DEFAULT_EPSILON = {"low-res": 2.0 / 255.0, "high-res": 12.75 / 255.0}
DEFAULT_TIMI_KERNEL = {"low-res": 3, "high-res": 5}


@dataclass(frozen=True)
class TimiParams:
    """
    Translation-invariant momentum attack settings.

    Attributes:
        kernel_size: Side of the Gaussian gradient-smoothing kernel (odd).
        diversity_prob: Probability of a random resize-pad before each gradient call.
        momentum: Decay factor of the accumulated gradient.
        resize_ratio: Smallest resize, as a fraction of the image side.
    """
    kernel_size: int = 5
    diversity_prob: float = 0.5
    momentum: float = 1.0
    resize_ratio: float = 0.9

    def __post_init__(self) -> None:
        if self.kernel_size < 1 or self.kernel_size % 2 == 0:
            raise AttackConfigError(f"timi.kernel_size must be a positive odd integer, got {self.kernel_size}")
        if not 0.0 <= self.diversity_prob <= 1.0:
            raise AttackConfigError(f"timi.diversity_prob must be in [0, 1], got {self.diversity_prob}")
        if self.momentum < 0:
            raise AttackConfigError(f"timi.momentum must be >= 0, got {self.momentum}")
        if not 0.0 < self.resize_ratio <= 1.0:
            raise AttackConfigError(f"timi.resize_ratio must be in (0, 1], got {self.resize_ratio}")


@dataclass(frozen=True)
class SimbaParams:
    """
    Attributes:
        max_queries: Victim query budget (0 returns the start unchanged).
        step: Per-coordinate step; None uses epsilon.
    """
    max_queries: int = 1000
    step: Optional[float] = None

    def __post_init__(self) -> None:
        if self.max_queries < 0:
            raise AttackConfigError(f"simba.max_queries must be >= 0, got {self.max_queries}")
        if self.step is not None and self.step <= 0:
            raise AttackConfigError(f"simba.step must be > 0, got {self.step}")


@dataclass(frozen=True)
class ExternalParams:
    """
    Attributes:
        command: Argument list; "{input}", "{output}", "{spec}" and "{query}" are replaced by file paths.
        timeout: Seconds before the command is killed (None uses PEAS_EXTERNAL_TIMEOUT).
        context: Free-form strings copied into the JSON sidecar (e.g. a checkpoint path).
        mode: "transfer" (one file exchange, no victim access) or "query" (the command may
            ask for victim probabilities over its stdin/stdout).
        max_queries: Victim query budget in query mode.
    """
    command: Tuple[str, ...] = ()
    timeout: Optional[int] = None
    context: Dict[str, str] = field(default_factory=dict)
    mode: str = "transfer"
    max_queries: int = 1000

    def __post_init__(self) -> None:
        object.__setattr__(self, "command", tuple(str(c) for c in self.command))
        if self.timeout is not None and self.timeout <= 0:
            raise AttackConfigError(f"external.timeout must be > 0, got {self.timeout}")
        if self.mode not in EXTERNAL_MODES:
            raise AttackConfigError(f"external.mode must be one of {', '.join(EXTERNAL_MODES)}, got '{self.mode}'")
        if self.max_queries < 0:
            raise AttackConfigError(f"external.max_queries must be >= 0, got {self.max_queries}")


@dataclass(frozen=True)
class AttackSpec:
    """
    A base attack and its budget.

    Attributes:
        algorithm: One of fgsm, pgd, timi, simba, external.
        epsilon: L-infinity budget in [0, 1].
        steps: Iterations of pgd/timi (fgsm always takes one).
        step_size: Per-step size; None resolves to epsilon / 4 (epsilon for fgsm).
        timi: TIMI settings.
        simba: SimBA settings.
        external: External command settings.
        seed: Seed of the attack's own randomness (timi diversity, simba order).
    """
    algorithm: str = "pgd"
    epsilon: float = 2.0 / 255.0
    steps: int = 10
    step_size: Optional[float] = None
    timi: TimiParams = field(default_factory=TimiParams)
    simba: SimbaParams = field(default_factory=SimbaParams)
    external: ExternalParams = field(default_factory=ExternalParams)
    seed: int = 0

    def __post_init__(self) -> None:
        if self.algorithm not in ALGORITHMS:
            raise AttackConfigError(f"Unknown attack algorithm '{self.algorithm}'. Valid: {', '.join(ALGORITHMS)}")
        if not 0.0 <= self.epsilon <= 1.0:
            raise AttackConfigError(f"epsilon must be in [0, 1], got {self.epsilon}")
        if self.steps < 1:
            raise AttackConfigError(f"steps must be >= 1, got {self.steps}")
        if self.step_size is not None and self.step_size <= 0:
            raise AttackConfigError(f"step_size must be > 0, got {self.step_size}")
        if self.algorithm == "external" and not self.external.command:
            raise AttackConfigError("External attacks need a command")

    @property
    def resolved_steps(self) -> int:
        return 1 if self.algorithm == "fgsm" else self.steps

    @property
    def resolved_step_size(self) -> float:
        if self.algorithm == "fgsm":
            return self.epsilon
        return self.epsilon / 4.0 if self.step_size is None else self.step_size

    @property
    def simba_step(self) -> float:
        return self.epsilon if self.simba.step is None else self.simba.step

    @property
    def is_query_attack(self) -> bool:
        return self.algorithm in QUERY_ALGORITHMS or (self.algorithm == "external" and self.external.mode == "query")

    def with_epsilon(self, epsilon: float) -> "AttackSpec":
        return replace(self, epsilon=float(epsilon))

    def with_seed(self, seed: int) -> "AttackSpec":
        return replace(self, seed=int(seed))

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["external"]["command"] = list(self.external.command)
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any], preset: str = "low-res") -> "AttackSpec":
        """
        Build a spec from a config mapping, filling epsilon and the TIMI kernel from the preset.

        Raises:
            AttackConfigError: On unknown keys or invalid values.
        """
        fields = dict(data)
        try:
            timi = dict(fields.pop("timi", {}) or {})
            timi.setdefault("kernel_size", DEFAULT_TIMI_KERNEL.get(preset, 3))
            simba = dict(fields.pop("simba", {}) or {})
            external = dict(fields.pop("external", {}) or {})
            fields.setdefault("epsilon", DEFAULT_EPSILON.get(preset, 2.0 / 255.0))
            return cls(
                timi=TimiParams(**timi),
                simba=SimbaParams(**simba),
                external=ExternalParams(**external),
                **fields,
            )
        except TypeError as e:
            raise AttackConfigError(f"Invalid attack specification: {data}") from e


@dataclass
class AttackResult:
    """
    Outcome of one attack run.

    Attributes:
        adversarial: Adversarial image, within epsilon of the start and in [0, 1].
        queries_used: Victim forward calls spent (0 for transfer attacks).
        success_on_source: Whether the image fools the model it was crafted on.
        trace: Per-iteration diagnostics (source-model loss for gradient attacks,
            accepted true-class probability for SimBA).
    """
    adversarial: ImageTensor
    queries_used: int = 0
    success_on_source: bool = False
    trace: Tuple[float, ...] = ()

    def __post_init__(self) -> None:
        self.adversarial = np.asarray(self.adversarial, dtype=np.float32)
        self.trace = tuple(float(t) for t in self.trace)
