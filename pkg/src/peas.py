#!/usr/bin/env python3
"""
Perceptual exploration with expected-transferability ranking.

For a correctly classified image x, the exploration step draws n perceptually
equivalent starts x_i from a sampling function, attacks each on the surrogate
f' to get x'_i, and scores every x'_i by its expected transferability (ET):
the mean over the ranking models of 1 - softmax(f(x'_i))[y]. The selected
example x* is the highest-ET candidate; selection strategies used in ablations
change only which candidate (and whether its attacked or un-attacked form) is
returned.

The candidate pipelines are independent: candidate i always uses the sampling
stream ``sampling.stream(i)`` and its own attack generator, so neither worker
count nor exploration size changes any individual candidate.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.attacks.dispatch import AttackModels, run_attack, run_transfer_batch
from src.attacks.models import AttackResult, AttackSpec
from src.attacks.simba import QueryOracle
from src.augment.distance import PerceptualDistance, perceptual_distance
from src.augment.sampling import SamplingFunction
from src.nn.functional import forward, predict, softmax
from src.nn.network import Network
from src.nn.tensor import ImageTensor, as_image
from src.utils.common_functions import derive_rng
from src.utils.config import SELECTION_STRATEGIES
from src.utils.exceptions import AttackConfigError, PeasError
from src.utils.logger import get_logger

logger = get_logger(__name__)

RankingSet = Sequence[Tuple[str, Network]]

EXPLORE_CHUNK = 32

STRATEGY_KINDS = tuple(SELECTION_STRATEGIES)


@dataclass(frozen=True)
class ETScore:
    """
    Expected transferability of one image.

    Attributes:
        value: Mean of the per-model terms, in [0, 1].
        terms: (model id, 1 - sigma_y) per ranking model.
    """
    value: float
    terms: Tuple[Tuple[str, float], ...]


@dataclass
class Candidate:
    """
    One explored start point and its attacked version.

    Attributes:
        index: Position in the exploration (defines tie-breaking).
        start: Augmented start x_i.
        adversarial: Attacked start x'_i.
        et: ET of the adversarial.
        start_et: ET of the un-attacked start.
        distance: Distance of x_i from the original image.
        success_on_surrogate: Whether x'_i fools f'.
        fools_victim_naturally: Whether the victim already misclassifies x_i (analysis only).
        adversarial_fools_victim: Whether the victim misclassifies x'_i (analysis only).
    """
    index: int
    start: ImageTensor
    adversarial: ImageTensor
    et: ETScore
    start_et: ETScore
    distance: PerceptualDistance
    success_on_surrogate: bool = False
    fools_victim_naturally: Optional[bool] = None
    adversarial_fools_victim: Optional[bool] = None


@dataclass(frozen=True)
class SelectionStrategy:
    """
    How x* is chosen from the candidates.

    ``oracle-perfect`` and the ``filtered-*`` kinds read victim decisions and
    are only meaningful in analysis runs.
    """
    kind: str = "top1-adversarial"

    def __post_init__(self) -> None:
        if self.kind not in STRATEGY_KINDS:
            raise AttackConfigError(f"Unknown selection strategy '{self.kind}'. Valid: {', '.join(STRATEGY_KINDS)}")

    @property
    def needs_victim(self) -> bool:
        return self.kind == "oracle-perfect" or self.kind.startswith("filtered-")

    @property
    def analysis_only(self) -> bool:
        return self.needs_victim

    @property
    def returns_augmented(self) -> bool:
        """True when the un-attacked start x_i is returned instead of x'_i."""
        return self.kind.endswith("augmented")


@dataclass(frozen=True)
class Selection:
    """
    Attributes:
        index: Selected candidate index.
        image: Returned image (x'_i, or x_i for augmented kinds).
        fallback: True when a filtered strategy found no eligible candidate and fell back to top-1.
    """
    index: int
    image: ImageTensor
    fallback: bool = False


@dataclass
class PeasResult:
    """
    Attributes:
        x_star: Selected image.
        selected_index: Index of the selected candidate.
        candidates: Every candidate, by index.
        fallback: See Selection.fallback.
    """
    x_star: ImageTensor
    selected_index: int
    candidates: List[Candidate] = field(default_factory=list)
    fallback: bool = False


def expected_transferability_batch(images: np.ndarray, y: int, ranking: RankingSet) -> List[ETScore]:
    """
    ET of every image of an NCHW batch for true label ``y``.

    Raises:
        PeasError: If the ranking set is empty.
    """
    if not ranking:
        raise PeasError("Expected transferability needs a non-empty ranking set")
    batch = np.asarray(images)
    if len(batch) == 0:
        return []
    columns = []
    for _, net in ranking:
        probs = softmax(forward(net, batch))
        columns.append(np.clip(1.0 - probs[:, y], 0.0, 1.0))
    terms = np.stack(columns, axis=1)
    ids = [model_id for model_id, _ in ranking]
    return [
        ETScore(
            value=math.fsum(row) / len(ids),
            terms=tuple((model_id, float(t)) for model_id, t in zip(ids, row)),
        )
        for row in terms.tolist()
    ]


def expected_transferability(x: np.ndarray, y: int, ranking: RankingSet) -> ETScore:
    """
    ET(x) = mean over the ranking models of 1 - softmax(f(x))[y].

    Args:
        x: CHW image.
        y: True label.
        ranking: (id, network) pairs of the ranking set, excluding f and f'.

    Raises:
        PeasError: If the ranking set is empty.
    """
    return expected_transferability_batch(as_image(x)[None], y, ranking)[0]


def _explore_chunk(
    x: np.ndarray,
    y: int,
    indices: Sequence[int],
    f_prime: Network,
    ranking: RankingSet,
    sampling: SamplingFunction,
    base: AttackSpec,
    victim: Optional[Network],
    surrogate_id: Optional[str],
) -> List[Candidate]:
    starts = np.stack([sampling.stream(i).sample(x) for i in indices])
    labels = [y] * len(indices)
    rngs = [derive_rng(base.seed, "attack", i) for i in indices]
    adversarials, success = run_transfer_batch(base, f_prime, starts, labels, rngs, surrogate_id)
    adv_scores = expected_transferability_batch(adversarials, y, ranking)
    start_scores = expected_transferability_batch(starts, y, ranking)
    natural: List[Optional[bool]] = [None] * len(indices)
    fooled: List[Optional[bool]] = [None] * len(indices)
    if victim is not None:
        natural = [bool(v) for v in predict(victim, starts) != y]
        fooled = [bool(v) for v in predict(victim, adversarials) != y]
    return [
        Candidate(
            index=i,
            start=starts[k],
            adversarial=adversarials[k],
            et=adv_scores[k],
            start_et=start_scores[k],
            distance=perceptual_distance(starts[k], x),
            success_on_surrogate=bool(success[k]),
            fools_victim_naturally=natural[k],
            adversarial_fools_victim=fooled[k],
        )
        for k, i in enumerate(indices)
    ]


def explore(
    x: np.ndarray,
    y: int,
    f_prime: Network,
    ranking: RankingSet,
    sampling: SamplingFunction,
    base: AttackSpec,
    n: int,
    victim: Optional[Network] = None,
    workers: int = 1,
    surrogate_id: Optional[str] = None,
) -> List[Candidate]:
    """
    Sample n starts, attack each on f', and score starts and adversarials by ET.

    Args:
        x: CHW image.
        y: True label.
        f_prime: Surrogate.
        ranking: Ranking set (ids and networks).
        sampling: Sampling function; candidate i uses ``sampling.stream(i)``.
        base: Transfer attack run from every start.
        n: Exploration size.
        victim: Victim network, only for analysis flags on the candidates.
        workers: Threads used for candidate chunks.
        surrogate_id: Surrogate name for external attacks.

    Returns:
        Candidates ordered by index.

    Raises:
        AttackConfigError: If n < 1 or the base attack needs victim queries.
    """
    if n < 1:
        raise AttackConfigError(f"Exploration size must be >= 1, got {n}")
    if base.is_query_attack:
        raise AttackConfigError(f"'{base.algorithm}' cannot be the base attack of the exploration")
    image = as_image(x, f_prime.input_shape)
    chunks = [list(range(s, min(s + EXPLORE_CHUNK, n))) for s in range(0, n, EXPLORE_CHUNK)]
    args = (image, y)
    rest = (f_prime, ranking, sampling, base, victim, surrogate_id)
    if workers <= 1 or len(chunks) == 1:
        parts = [_explore_chunk(*args, chunk, *rest) for chunk in chunks]
    else:
        with ThreadPoolExecutor(max_workers=min(workers, len(chunks))) as executor:
            parts = list(executor.map(lambda chunk: _explore_chunk(*args, chunk, *rest), chunks))
    return [c for part in parts for c in part]


def _argmax(values: Sequence[float]) -> int:
    # np.argmax returns the first maximum, i.e. the lowest index on ties
    return int(np.argmax(np.asarray(values, dtype=np.float64)))


def select_candidate(
    candidates: Sequence[Candidate],
    strategy: SelectionStrategy,
    rng: Optional[np.random.Generator] = None,
) -> Selection:
    """
    Choose x* from explored candidates.

    - top1-adversarial: highest ET(x'_i), returns x'_i.
    - top1-augmented: highest ET(x_i), returns x_i un-attacked.
    - random-adversarial / random-augmented: uniform pick, returns x'_i / x_i.
    - oracle-perfect: highest-ET x'_i among those the victim misclassifies, else top1-adversarial.
    - filtered-*: as top1-*, ignoring candidates whose x_i already fools the victim;
      when none is left, falls back to the unfiltered choice and flags it.

    Ties resolve to the lowest index.

    Raises:
        PeasError: If there are no candidates.
        AttackConfigError: If a victim-dependent strategy meets candidates without victim flags,
            or a random strategy gets no generator.
    """
    if not candidates:
        raise PeasError("Cannot select from an empty candidate list")
    kind = strategy.kind
    if strategy.needs_victim and any(
        c.fools_victim_naturally is None or c.adversarial_fools_victim is None for c in candidates
    ):
        raise AttackConfigError(f"Strategy '{kind}' needs victim decisions on the candidates (analysis mode)")

    def pick(pool: Sequence[Candidate], augmented: bool) -> Candidate:
        scores = [c.start_et.value if augmented else c.et.value for c in pool]
        return pool[_argmax(scores)]

    def output(c: Candidate, augmented: bool, fallback: bool = False) -> Selection:
        return Selection(index=c.index, image=c.start if augmented else c.adversarial, fallback=fallback)

    if kind in ("top1-adversarial", "top1-augmented"):
        augmented = kind == "top1-augmented"
        return output(pick(candidates, augmented), augmented)
    if kind in ("random-adversarial", "random-augmented"):
        if rng is None:
            raise AttackConfigError(f"Strategy '{kind}' needs a random generator")
        return output(candidates[int(rng.integers(len(candidates)))], kind == "random-augmented")
    if kind == "oracle-perfect":
        fooling = [c for c in candidates if c.adversarial_fools_victim]
        return output(pick(fooling or candidates, False), False)
    augmented = kind == "filtered-top1-augmented"
    eligible = [c for c in candidates if not c.fools_victim_naturally]
    if not eligible:
        return output(pick(candidates, augmented), augmented, fallback=True)
    return output(pick(eligible, augmented), augmented)


def rank_candidates(candidates: Sequence[Candidate]) -> List[Candidate]:
    """Candidates by descending adversarial ET; equal scores keep their input order."""
    return sorted(candidates, key=lambda c: -c.et.value)


def peas_attack(
    x: np.ndarray,
    y: int,
    f_prime: Network,
    ranking: RankingSet,
    sampling: SamplingFunction,
    base: AttackSpec,
    n: int,
    strategy: SelectionStrategy = SelectionStrategy(),
    victim: Optional[Network] = None,
    selection_seed: int = 0,
    workers: int = 1,
    surrogate_id: Optional[str] = None,
) -> PeasResult:
    """
    Explore n candidates, rank them and return x* with the full candidate list.

    Args:
        x: CHW image, correctly classified by the victim.
        y: True label.
        f_prime: Surrogate network.
        ranking: Ranking set, disjoint from f and f'.
        sampling: Sampling function.
        base: Transfer attack (pgd, fgsm, timi or external).
        n: Exploration size (>= 1).
        strategy: Selection strategy.
        victim: Victim network, required for analysis-only strategies.
        selection_seed: Seed of the random strategies.
        workers: Threads for candidate chunks.
        surrogate_id: Surrogate name for external attacks.

    Raises:
        AttackConfigError: If a victim-dependent strategy is used without a victim.
    """
    if strategy.needs_victim and victim is None:
        raise AttackConfigError(f"Strategy '{strategy.kind}' needs victim access (analysis only)")
    candidates = explore(x, y, f_prime, ranking, sampling, base, n, victim, workers, surrogate_id)
    selection = select_candidate(candidates, strategy, np.random.default_rng(selection_seed))
    if selection.fallback:
        logger.debug("All %d candidates fool the victim unattacked; falling back to top-1", len(candidates))
    return PeasResult(
        x_star=selection.image,
        selected_index=selection.index,
        candidates=candidates,
        fallback=selection.fallback,
    )


def peas_then_query(
    x: np.ndarray,
    y: int,
    f_prime: Network,
    ranking: RankingSet,
    sampling: SamplingFunction,
    n: int,
    query_attack: AttackSpec,
    victim_oracle: QueryOracle,
    base: Optional[AttackSpec] = None,
    workers: int = 1,
    candidates: Optional[Sequence[Candidate]] = None,
    surrogate_id: Optional[str] = None,
) -> AttackResult:
    """
    Run the exploration with a pgd base on f' (no victim queries), then start the
    query attack from x*.

    Args:
        query_attack: A simba spec or an external query-mode spec.
        victim_oracle: Query handle on the victim.
        base: Transfer attack of the exploration; pgd with the query attack's epsilon by default.
        candidates: Already explored candidates to select x* from instead of exploring again.
        surrogate_id: Surrogate name passed to external attacks.

    Returns:
        The query attack's result; ``queries_used`` counts every victim query.

    Raises:
        AttackConfigError: If ``query_attack`` is not a query attack.
    """
    if not query_attack.is_query_attack:
        raise AttackConfigError(f"peas_then_query needs a query attack, got '{query_attack.algorithm}'")
    if candidates is not None:
        x_star = select_candidate(candidates, SelectionStrategy()).image
    else:
        base = base or AttackSpec(algorithm="pgd", epsilon=query_attack.epsilon, seed=query_attack.seed)
        before = victim_oracle.queries
        x_star = peas_attack(
            x, y, f_prime, ranking, sampling, base, n, workers=workers, surrogate_id=surrogate_id
        ).x_star
        if victim_oracle.queries != before:
            raise PeasError("Exploration phase queried the victim")
    return run_attack(query_attack, AttackModels(victim=victim_oracle, surrogate_id=surrogate_id), x_star, y)


def candidates_to_dict(candidates: Sequence[Candidate], selected_index: Optional[int] = None) -> Dict[str, Any]:
    """Plain-data dump of a candidate list for reports."""
    return {
        "selected_index": selected_index,
        "candidates": [
            {
                "index": c.index,
                "et": c.et.value,
                "start_et": c.start_et.value,
                "l2": c.distance.l2,
                "linf": c.distance.linf,
                "success_on_surrogate": c.success_on_surrogate,
                "fools_victim_naturally": c.fools_victim_naturally,
                "adversarial_fools_victim": c.adversarial_fools_victim,
            }
            for c in candidates
        ],
    }
