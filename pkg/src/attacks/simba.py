"""
SimBA: a query attack that only sees the victim's softmax output.
"""

import threading
from typing import List

import numpy as np

from src.attacks.models import AttackResult, AttackSpec
from src.nn.functional import forward, softmax
from src.nn.network import Network
from src.nn.tensor import as_image
from src.utils.exceptions import AttackConfigError
from src.utils.logger import get_logger

logger = get_logger(__name__)


class QueryOracle:
    """
    Query-only handle on a victim network.

    Exposes softmax probabilities and nothing else, and counts every
    evaluation. The counter is protected by a lock so one oracle can be
    shared by concurrent attacks.
    """

    def __init__(self, net: Network) -> None:
        self._net = net
        self._lock = threading.Lock()
        self._queries = 0

    @property
    def queries(self) -> int:
        with self._lock:
            return self._queries

    @property
    def input_shape(self):
        return self._net.input_shape

    def query(self, x: np.ndarray) -> np.ndarray:
        """Softmax probabilities for one CHW image; costs one query."""
        image = as_image(x, self._net.input_shape)
        with self._lock:
            self._queries += 1
        return softmax(forward(self._net, image))


def attack_simba(oracle: QueryOracle, start: np.ndarray, y: int, spec: AttackSpec) -> AttackResult:
    """
    Pixel-basis SimBA from ``start``.

    Coordinates are visited in a random order (seeded by ``spec.seed``). For each,
    the step ``-step`` is tried first and ``+step`` second; a trial is kept when the
    true-class probability drops. Trials are projected onto the epsilon-ball around
    ``start`` intersected with [0, 1]; a trial that projects to the current value is
    skipped without a query.

    The first query checks the start itself, so a start that already fools the
    victim costs exactly one query. ``max_queries = 0`` returns the start unchanged.

    Args:
        oracle: Victim probabilities.
        start: CHW start image.
        y: True label.
        spec: A simba spec (epsilon, simba.max_queries, simba.step, seed).

    Returns:
        AttackResult whose ``success_on_source`` says whether the victim is fooled,
        ``queries_used`` counts every probability evaluation and ``trace`` lists
        the accepted true-class probabilities.

    Raises:
        AttackConfigError: If the spec is not a simba spec.
    """
    if spec.algorithm != "simba":
        raise AttackConfigError(f"Expected a simba spec, got '{spec.algorithm}'")
    x0 = as_image(start, oracle.input_shape).copy()
    max_queries = spec.simba.max_queries
    if max_queries == 0:
        return AttackResult(adversarial=x0, queries_used=0, success_on_source=False)

    eps = np.float32(spec.epsilon)
    step = np.float32(spec.simba_step)
    lower = np.clip(x0 - eps, 0.0, 1.0).reshape(-1)
    upper = np.clip(x0 + eps, 0.0, 1.0).reshape(-1)

    x = x0.copy()
    flat = x.reshape(-1)
    probs = oracle.query(x)
    used = 1
    p_y = float(probs[y])
    trace: List[float] = [p_y]
    if int(np.argmax(probs)) != y:
        return AttackResult(adversarial=x, queries_used=used, success_on_source=True, trace=trace)

    order = np.random.default_rng(spec.seed).permutation(flat.size)
    for index in order:
        if used >= max_queries:
            break
        current = flat[index]
        for direction in (-step, step):
            if used >= max_queries:
                break
            trial = np.float32(np.clip(current + direction, lower[index], upper[index]))
            if trial == current:
                continue
            flat[index] = trial
            probs = oracle.query(x)
            used += 1
            if probs[y] < p_y:
                p_y = float(probs[y])
                trace.append(p_y)
                if int(np.argmax(probs)) != y:
                    return AttackResult(adversarial=x, queries_used=used, success_on_source=True, trace=trace)
                break
            flat[index] = current

    logger.debug("SimBA stopped after %d queries with p_y=%.4f", used, p_y)
    return AttackResult(adversarial=x, queries_used=used, success_on_source=False, trace=trace)
