"""
Uniform entry point over all base attacks.
"""

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from src.attacks.external import run_external_attack, run_external_query_attack
from src.attacks.gradient import attack_fgsm, attack_pgd, attack_timi, fgsm_batch, pgd_batch, timi_batch
from src.attacks.models import AttackResult, AttackSpec
from src.attacks.simba import QueryOracle, attack_simba
from src.nn.functional import predict
from src.nn.network import Network
from src.utils.exceptions import AttackConfigError


@dataclass(frozen=True)
class AttackModels:
    """
    The models an attack may touch.

    Attributes:
        surrogate: White-box surrogate f' (transfer attacks).
        victim: Query-only victim handle (query attacks).
        surrogate_id: Surrogate name passed to external attacks.
    """
    surrogate: Optional[Network] = None
    victim: Optional[QueryOracle] = None
    surrogate_id: Optional[str] = None


def run_attack(spec: AttackSpec, models: AttackModels, start: np.ndarray, y: int) -> AttackResult:
    """
    Run ``spec`` from ``start`` and return its result.

    Raises:
        AttackConfigError: If the model the algorithm needs is missing.
    """
    if spec.is_query_attack:
        if models.victim is None:
            raise AttackConfigError(f"{spec.algorithm} needs a victim oracle")
        if spec.algorithm == "external":
            return run_external_query_attack(spec, models.victim, start, y, surrogate=models.surrogate_id)
        return attack_simba(models.victim, start, y, spec)
    if spec.algorithm == "external":
        result = run_external_attack(spec, start, y, surrogate=models.surrogate_id)
        if models.surrogate is not None:
            result.success_on_source = bool(predict(models.surrogate, result.adversarial) != y)
        return result
    if models.surrogate is None:
        raise AttackConfigError(f"{spec.algorithm} needs a surrogate network")
    if spec.algorithm == "pgd":
        return attack_pgd(models.surrogate, start, y, spec)
    if spec.algorithm == "fgsm":
        return attack_fgsm(models.surrogate, start, y, spec)
    return attack_timi(models.surrogate, start, y, spec)


def run_transfer_batch(
    spec: AttackSpec,
    surrogate: Network,
    starts: np.ndarray,
    labels: Sequence[int],
    rngs: Sequence[np.random.Generator],
    surrogate_id: Optional[str] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Run a transfer attack on every row of an NCHW batch.

    Args:
        rngs: One generator per row (consumed by timi only).

    Returns:
        (adversarial batch, success-on-surrogate flags)

    Raises:
        AttackConfigError: For query attacks, which cannot run without a victim.
    """
    if spec.is_query_attack:
        raise AttackConfigError(f"'{spec.algorithm}' is a query attack, not a transfer attack")
    if spec.algorithm == "pgd":
        adv, success, _ = pgd_batch(surrogate, starts, labels, spec.epsilon, spec.resolved_steps, spec.resolved_step_size)
    elif spec.algorithm == "fgsm":
        adv, success, _ = fgsm_batch(surrogate, starts, labels, spec.epsilon)
    elif spec.algorithm == "timi":
        adv, success, _ = timi_batch(
            surrogate, starts, labels, spec.epsilon, spec.resolved_steps, spec.resolved_step_size, spec.timi, rngs
        )
    elif spec.algorithm == "external":
        models = AttackModels(surrogate=surrogate, surrogate_id=surrogate_id)
        results = [run_attack(spec, models, starts[i], int(labels[i])) for i in range(len(starts))]
        adv = np.stack([r.adversarial for r in results]) if results else np.zeros_like(starts)
        success = np.array([r.success_on_source for r in results], dtype=bool)
    else:
        raise AttackConfigError(f"'{spec.algorithm}' is not a transfer attack")
    return adv, success
