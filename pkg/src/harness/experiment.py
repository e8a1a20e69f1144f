#!/usr/bin/env python3
"""
Experiment orchestration.

A run enumerates every (victim, surrogate) role pair of the zoo, builds one
victim-correct pool per victim, and evaluates every configured attack and
strategy on every (pair, sample) task. Tasks run on a thread pool; all their
randomness is derived from (master seed, pair id, sample id, stream tag), so
the number of workers never changes a result.

Within one (pair, sample) the exploration is run once per (base attack,
sampling function) at the largest exploration size of the plan; every
selection strategy and every smaller n selects from that same candidate list
(n uses its prefix).
"""

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.attacks.dispatch import AttackModels, run_attack
from src.attacks.models import AttackSpec
from src.attacks.simba import QueryOracle
from src.augment.presets import AUGMENTATION_KINDS, AugmentationPreset
from src.augment.sampling import SamplingFunction, build_sampling
from src.datasets.loaders import load_dataset
from src.datasets.models import DatasetProfile, default_preset
from src.datasets.synthetic import generate_synthetic_dataset
from src.harness.config import ExperimentConfig
from src.harness.pool import build_pool, victim_fooled
from src.harness.report import ExperimentReport, ReportRow, build_curves, finalize_report
from src.harness.stats import bootstrap_ci
from src.nn.tensor import LabeledSample
from src.peas import (
    STRATEGY_KINDS,
    Candidate,
    SelectionStrategy,
    candidates_to_dict,
    explore,
    peas_then_query,
    select_candidate,
)
from src.utils.common_functions import derive_rng, derive_seed
from src.utils.config import HARNESS_STRATEGIES, get_workers
from src.utils.exceptions import ConfigError
from src.utils.logger import get_logger
from src.zoo.checkpoint import MANIFEST, load_zoo, save_zoo
from src.zoo.models import ModelZoo, RoleAssignment
from src.zoo.zoo import enumerate_roles, train_zoo

logger = get_logger(__name__)

# (strategy, sampling label, attack, epsilon, n)
RowKey = Tuple[str, str, str, float, int]
Split = List[LabeledSample]


def sampling_label(mode: str, augmentations: Tuple[str, ...]) -> str:
    """Report label of a sampling function, e.g. "S2" or "S1:sharpness"."""
    if mode == "S1" and len(augmentations) == 1:
        return f"S1:{augmentations[0]}"
    return mode


@dataclass(frozen=True)
class EvaluationPlan:
    """
    What to measure on every (pair, sample) task.

    Attributes:
        epsilons: Budgets to evaluate.
        n_values: Exploration sizes (smaller sizes reuse prefixes of the largest).
        samplings: (mode, augmentation subset) per sampling function.
        strategies: "baseline", "vanilla" and selection strategy kinds.
        attacks: Attack algorithms.
    """
    epsilons: Tuple[float, ...]
    n_values: Tuple[int, ...]
    samplings: Tuple[Tuple[str, Tuple[str, ...]], ...]
    strategies: Tuple[str, ...]
    attacks: Tuple[str, ...]

    @property
    def n_max(self) -> int:
        return max(self.n_values)

    @property
    def selection_kinds(self) -> List[str]:
        return [k for k in STRATEGY_KINDS if k in self.strategies]

    def row_keys(self, query_algorithms: Sequence[str]) -> List[RowKey]:
        """Every measurement of a task, in report order."""
        keys: List[RowKey] = []
        for eps in self.epsilons:
            for algorithm in self.attacks:
                if "baseline" in self.strategies:
                    keys.append(("baseline", "none", algorithm, eps, 0))
                if algorithm in query_algorithms:
                    if "top1-adversarial" in self.strategies:
                        for mode, augs in self.samplings:
                            label = sampling_label(mode, augs)
                            keys.extend(("top1-adversarial", label, algorithm, eps, n) for n in self.n_values)
                    continue
                if "vanilla" in self.strategies:
                    keys.extend(("vanilla", "noise", algorithm, eps, n) for n in self.n_values)
                for mode, augs in self.samplings:
                    label = sampling_label(mode, augs)
                    for n in self.n_values:
                        keys.extend((kind, label, algorithm, eps, n) for kind in self.selection_kinds)
        return keys


@dataclass
class SampleOutcome:
    """
    Per-task results.

    Attributes:
        fooled: Victim decision per row key.
        queries: Victim queries per row key (query attacks only).
        natural: Fraction of un-attacked candidates the victim misclassifies, per sampling label.
        dumps: Candidate dumps (when enabled).
        seconds: Wall time of the task.
    """
    fooled: Dict[RowKey, bool] = field(default_factory=dict)
    queries: Dict[RowKey, int] = field(default_factory=dict)
    natural: Dict[str, float] = field(default_factory=dict)
    dumps: List[Dict[str, Any]] = field(default_factory=list)
    seconds: float = 0.0


def _seed_int(master: int, *keys: Any) -> int:
    return int(derive_seed(master, *keys).generate_state(1)[0])


class ExperimentRunner:
    """
    Runs the harness operations for one ExperimentConfig.

    Data, zoo and pools are prepared once and cached.
    """

    def __init__(self, config: ExperimentConfig, workers: Optional[int] = None) -> None:
        self.config = config
        self.workers = workers or config.workers or get_workers()
        self._data: Optional[Tuple[DatasetProfile, Split, Split]] = None
        self._zoo: Optional[ModelZoo] = None

    # ------------------------------------------------------------------
    # Preparation
    # ------------------------------------------------------------------

    def prepare_data(self) -> Tuple[DatasetProfile, Split, Split]:
        """
        Generate or load the dataset and derive its profile.

        Raises:
            DatasetError: If loading fails.
            ConfigError: If the dataset has no training samples.
        """
        if self._data is not None:
            return self._data
        section = self.config.dataset
        if section.format == "synthetic":
            train, test = generate_synthetic_dataset(section.synthetic)
            profile = section.synthetic.profile(section.name, section.preset)
        else:
            train, test = load_dataset(section.path, section.format, section.classes)
            if not train:
                raise ConfigError(f"Dataset at {section.path} has no training samples")
            shape = tuple(int(d) for d in train[0].image.shape)
            classes = section.classes or max(s.label for s in [*train, *test]) + 1
            profile = DatasetProfile(section.name, shape, max(classes, 2), section.preset or default_preset(shape))
        logger.info("Dataset %s: %d train / %d test samples, shape %s, preset %s",
                    profile.name, len(train), len(test), profile.shape, profile.preset)
        self._data = (profile, train, test)
        return self._data

    def prepare_zoo(self) -> ModelZoo:
        """
        Load the configured zoo, training and saving it first when its directory has no manifest.

        Only the configured architectures are used, in configured order.

        Raises:
            ConfigError: If a configured model id is missing or the zoo was trained on another profile.
            ZooTrainingError: If training misses the accuracy floor.
        """
        if self._zoo is not None:
            return self._zoo
        profile, train, test = self.prepare_data()
        zoo_dir = Path(self.config.zoo_dir)
        if (zoo_dir / MANIFEST).is_file():
            zoo = load_zoo(zoo_dir)
        else:
            logger.info("No zoo at %s, training one", zoo_dir)
            zoo = train_zoo(profile, train, test, self.config.zoo, workers=self.workers)
            save_zoo(zoo, zoo_dir)
        if (tuple(zoo.profile.shape), zoo.profile.num_classes) != (tuple(profile.shape), profile.num_classes):
            raise ConfigError(
                f"Zoo at {zoo_dir} was trained for shape {zoo.profile.shape} with {zoo.profile.num_classes} classes, "
                f"the dataset has shape {profile.shape} with {profile.num_classes} classes"
            )
        missing = [a for a in self.config.zoo.architectures if a not in zoo]
        if missing:
            raise ConfigError(f"Models {', '.join(missing)} are not in the zoo at {zoo_dir}. Available: {', '.join(zoo.ids)}")
        entries = {e.arch_id: e for e in zoo.entries}
        self._zoo = ModelZoo(profile=zoo.profile, entries=tuple(entries[a] for a in self.config.zoo.architectures))
        return self._zoo

    # ------------------------------------------------------------------
    # Evaluation
    # ------------------------------------------------------------------

    def _sampling(
        self, mode: str, augs: Tuple[str, ...], preset: AugmentationPreset, role: RoleAssignment, sample_id: int
    ) -> SamplingFunction:
        label = sampling_label(mode, augs)
        seed = derive_seed(self.config.seed, role.pair_id, sample_id, "sampling", label)
        return build_sampling(mode, preset, augmentations=augs, seed=seed)

    def _evaluate_sample(
        self,
        plan: EvaluationPlan,
        zoo: ModelZoo,
        role: RoleAssignment,
        sample: LabeledSample,
        preset_id: str,
        preset: AugmentationPreset,
    ) -> SampleOutcome:
        started = time.perf_counter()
        config = self.config
        x, y, sid = sample.image, int(sample.label), sample.sample_id
        victim = zoo.get(role.victim)
        surrogate = zoo.get(role.surrogate)
        ranking = [(m, zoo.get(m)) for m in role.ranking]
        attack_seed = _seed_int(config.seed, role.pair_id, sid, "attack")
        outcome = SampleOutcome()
        images: Dict[RowKey, np.ndarray] = {}

        for eps_index, eps in enumerate(plan.epsilons):
            explored: Dict[Tuple[str, str], List[Candidate]] = {}

            def candidates_for(base: AttackSpec, sampling: SamplingFunction) -> List[Candidate]:
                key = (base.algorithm, sampling.label)
                if key not in explored:
                    explored[key] = explore(
                        x, y, surrogate, ranking, sampling, base, plan.n_max,
                        victim=victim, workers=1, surrogate_id=role.surrogate,
                    )
                return explored[key]

            samplings = [self._sampling(mode, augs, preset, role, sid) for mode, augs in plan.samplings]
            for algorithm in plan.attacks:
                spec = config.attack_spec(preset_id, algorithm).with_epsilon(eps).with_seed(attack_seed)
                if "baseline" in plan.strategies:
                    key = ("baseline", "none", algorithm, eps, 0)
                    if spec.is_query_attack:
                        models = AttackModels(victim=QueryOracle(victim), surrogate_id=role.surrogate)
                    else:
                        models = AttackModels(surrogate=surrogate, surrogate_id=role.surrogate)
                    result = run_attack(spec, models, x, y)
                    images[key] = result.adversarial
                    if spec.is_query_attack:
                        outcome.queries[key] = result.queries_used

                if spec.is_query_attack:
                    if "top1-adversarial" not in plan.strategies:
                        continue
                    base = config.attack_spec(preset_id, "pgd").with_epsilon(eps).with_seed(attack_seed)
                    for sampling in samplings:
                        candidates = candidates_for(base, sampling)
                        for n in plan.n_values:
                            key = ("top1-adversarial", sampling.label, algorithm, eps, n)
                            oracle = QueryOracle(victim)
                            result = peas_then_query(
                                x, y, surrogate, ranking, sampling, n, spec, oracle,
                                base=base, candidates=candidates[:n], surrogate_id=role.surrogate,
                            )
                            images[key] = result.adversarial
                            outcome.queries[key] = result.queries_used
                    continue

                if "vanilla" in plan.strategies:
                    noise = SamplingFunction.noise(
                        eps, preset, seed=derive_seed(config.seed, role.pair_id, sid, "sampling", "noise")
                    )
                    candidates = candidates_for(spec, noise)
                    for n in plan.n_values:
                        selection = select_candidate(candidates[:n], SelectionStrategy("top1-adversarial"))
                        images[("vanilla", "noise", algorithm, eps, n)] = selection.image

                for sampling in samplings:
                    candidates = candidates_for(spec, sampling)
                    for n in plan.n_values:
                        prefix = candidates[:n]
                        for kind in plan.selection_kinds:
                            rng = derive_rng(config.seed, role.pair_id, sid, "select", kind, n)
                            selection = select_candidate(prefix, SelectionStrategy(kind), rng)
                            images[(kind, sampling.label, algorithm, eps, n)] = selection.image

            for (base_algorithm, label), candidates in explored.items():
                if label != "noise" and eps_index == 0:
                    outcome.natural[label] = float(np.mean([bool(c.fools_victim_naturally) for c in candidates]))
                if config.dump_candidates:
                    top = select_candidate(candidates, SelectionStrategy("top1-adversarial")).index
                    outcome.dumps.append({
                        "pair": role.pair_id,
                        "sample_id": sid,
                        "epsilon": eps,
                        "attack": base_algorithm,
                        "sampling": label,
                        **candidates_to_dict(candidates, top),
                    })

        keys = list(images)
        if keys:
            flags = victim_fooled(victim, np.stack([images[k] for k in keys]), [y] * len(keys))
            outcome.fooled = {k: bool(f) for k, f in zip(keys, flags)}
        outcome.seconds = time.perf_counter() - started
        return outcome

    def evaluate(self, plan: EvaluationPlan, kind: str) -> ExperimentReport:
        """
        Run ``plan`` on every role pair and pool sample.

        Returns:
            ExperimentReport with rows, aggregates, boosts, analysis and metadata
            (curves are added by the sweep operations).
        """
        config = self.config
        profile, _, test = self.prepare_data()
        zoo = self.prepare_zoo()
        roles = enumerate_roles(zoo)
        preset_id = profile.preset
        preset = config.augmentation_preset(preset_id)
        query_algorithms = [a for a in plan.attacks if config.attack_spec(preset_id, a).is_query_attack]
        keys = plan.row_keys(query_algorithms)
        if not keys:
            raise ConfigError(f"Nothing to measure: strategies {list(plan.strategies)} with attacks {list(plan.attacks)}")

        logger.info("[1/3] Building victim-correct pools of %d samples", config.pool_size)
        victims = list(dict.fromkeys(r.victim for r in roles))
        pools = {v: build_pool(zoo.get(v), test, config.pool_size, config.seed) for v in victims}

        tasks = [(role, sample) for role in roles for sample in pools[role.victim]]
        logger.info("[2/3] Evaluating %d pairs x %d samples (%d measurements each) on %d workers",
                    len(roles), config.pool_size, len(keys), self.workers)
        started = time.perf_counter()
        outcomes: List[SampleOutcome] = []
        step = max(1, len(tasks) // 10)
        with ThreadPoolExecutor(max_workers=max(1, self.workers)) as executor:
            futures = [
                executor.submit(self._evaluate_sample, plan, zoo, role, sample, preset_id, preset)
                for role, sample in tasks
            ]
            for done, future in enumerate(futures, start=1):
                outcomes.append(future.result())
                if done % step == 0 or done == len(futures):
                    logger.info("   %d/%d tasks done", done, len(futures), extra={"progress": done / len(futures)})
        wall = time.perf_counter() - started

        logger.info("[3/3] Aggregating %d rows", len(roles) * len(keys))
        by_pair: Dict[str, List[SampleOutcome]] = {}
        for (role, _), outcome in zip(tasks, outcomes):
            by_pair.setdefault(role.pair_id, []).append(outcome)

        rows: List[ReportRow] = []
        natural: Dict[str, Dict[str, float]] = {}
        dumps: List[Dict[str, Any]] = []
        for role in roles:
            pair_outcomes = by_pair.get(role.pair_id, [])
            for key in keys:
                rows.append(self._row(profile, role, key, pair_outcomes))
            labels = sorted({label for o in pair_outcomes for label in o.natural})
            if labels:
                natural[role.pair_id] = {
                    label: float(np.mean([o.natural[label] for o in pair_outcomes if label in o.natural]))
                    for label in labels
                }
            for o in pair_outcomes:
                dumps.extend(o.dumps)

        seconds = [o.seconds for o in outcomes]
        report = ExperimentReport(
            kind=kind,
            rows=rows,
            analysis={"natural_error_rate": natural},
            candidates=dumps,
            metadata={
                "config": {k: v for k, v in config.to_dict().items() if k != "workers"},
                "config_hash": config.config_hash,
                "seed": config.seed,
                "dataset": profile.to_dict(),
                "pairs": [r.pair_id for r in roles],
                "zoo_accuracy": {a: zoo.accuracy(a) for a in zoo.ids},
                "prefix_reuse": len(plan.n_values) > 1,
            },
            timing={
                "wall_seconds": wall,
                "workers": self.workers,
                "tasks": len(tasks),
                "mean_seconds_per_sample": float(np.mean(seconds)) if seconds else 0.0,
                "max_seconds_per_sample": float(np.max(seconds)) if seconds else 0.0,
            },
        )
        finalize_report(report)
        for entry in report.aggregates:
            logger.info("   %-26s %-16s %-6s eps=%.4f n=%-4d macro ASR %.3f",
                        entry["strategy"], entry["sampling"], entry["attack"], entry["epsilon"], entry["n"],
                        entry["macro_asr"], extra={"strategy": entry["strategy"]})
        return report

    def _row(
        self, profile: DatasetProfile, role: RoleAssignment, key: RowKey, outcomes: Sequence[SampleOutcome]
    ) -> ReportRow:
        strategy, sampling, algorithm, eps, n = key
        flags = [o.fooled[key] for o in outcomes]
        rng = derive_rng(self.config.seed, "bootstrap", role.pair_id, strategy, sampling, algorithm, repr(eps), n)
        low, high = bootstrap_ci(flags, rng, self.config.bootstrap_resamples, self.config.confidence)
        successful_queries = [o.queries[key] for o in outcomes if key in o.queries and o.fooled[key]]
        has_queries = any(key in o.queries for o in outcomes)
        return ReportRow(
            dataset=profile.name,
            victim=role.victim,
            surrogate=role.surrogate,
            strategy=strategy,
            sampling=sampling,
            attack=algorithm,
            epsilon=eps,
            n=n,
            asr=float(np.mean(flags)) if flags else 0.0,
            ci_low=low,
            ci_high=high,
            pool_size=len(flags),
            seed=self.config.seed,
            successes=int(sum(flags)),
            mean_queries=float(np.mean(successful_queries)) if has_queries and successful_queries else None,
            median_queries=float(np.median(successful_queries)) if has_queries and successful_queries else None,
        )

    # ------------------------------------------------------------------
    # Operations
    # ------------------------------------------------------------------

    def _plan(self, **changes: Any) -> EvaluationPlan:
        config = self.config
        profile = self.prepare_data()[0]
        plan = EvaluationPlan(
            epsilons=(config.resolved_epsilon(profile.preset),),
            n_values=(config.n,),
            samplings=tuple((mode, AUGMENTATION_KINDS) for mode in config.samplings),
            strategies=config.strategies,
            attacks=config.attacks,
        )
        return replace(plan, **changes)

    def run_pairwise(self) -> ExperimentReport:
        """Every role pair, every configured attack and strategy, at the configured epsilon and n."""
        return self.evaluate(self._plan(), "pairwise")

    def run_attacks(self) -> ExperimentReport:
        """The configured base attacks alone, from the original images."""
        return self.evaluate(self._plan(strategies=("baseline",)), "attack")

    def ablate(self) -> ExperimentReport:
        """Pairwise run with every strategy, including the victim-aware analysis ones."""
        return self.evaluate(self._plan(strategies=tuple(HARNESS_STRATEGIES)), "ablate")

    def sweep_n(self, n_values: Optional[Sequence[int]] = None) -> ExperimentReport:
        """
        ASR per exploration size; every n selects from a prefix of one exploration at max(n).

        Raises:
            ConfigError: If the grid is empty.
        """
        values = tuple(sorted(set(n_values or self.config.sweeps.n_values)))
        if not values:
            raise ConfigError("sweep_n needs a non-empty n grid")
        report = self.evaluate(self._plan(n_values=values), "sweep-n")
        report.curves = build_curves(report.rows, axis="n", scope="pair")
        return report

    def sweep_epsilon(self, eps_values: Optional[Sequence[float]] = None) -> ExperimentReport:
        """
        ASR per epsilon, with one curve per victim averaged over its surrogates.

        Raises:
            ConfigError: If the grid is empty.
        """
        values = tuple(float(e) for e in (eps_values or self.config.sweeps.epsilon_values))
        if not values:
            raise ConfigError("sweep_epsilon needs a non-empty epsilon grid")
        report = self.evaluate(self._plan(epsilons=values), "sweep-eps")
        report.curves = build_curves(report.rows, axis="epsilon", scope="victim")
        return report

    def augmentation_effectiveness(self) -> ExperimentReport:
        """PEAS with S1 restricted to each single augmentation, over the n grid."""
        kinds = self.config.sweeps.augmentations
        if not kinds:
            raise ConfigError("augmentation_effectiveness needs at least one augmentation")
        plan = self._plan(
            samplings=tuple(("S1", (kind,)) for kind in kinds),
            n_values=tuple(sorted(set(self.config.sweeps.n_values))),
            strategies=("baseline", "top1-adversarial"),
        )
        report = self.evaluate(plan, "sweep-aug")
        report.curves = build_curves(report.rows, axis="n", scope="pair")
        return report


def run_pairwise(config: ExperimentConfig, workers: Optional[int] = None) -> ExperimentReport:
    return ExperimentRunner(config, workers).run_pairwise()


def sweep_n(config: ExperimentConfig, n_values: Sequence[int], workers: Optional[int] = None) -> ExperimentReport:
    return ExperimentRunner(config, workers).sweep_n(n_values)


def sweep_epsilon(config: ExperimentConfig, eps_values: Sequence[float], workers: Optional[int] = None) -> ExperimentReport:
    return ExperimentRunner(config, workers).sweep_epsilon(eps_values)


def augmentation_effectiveness(config: ExperimentConfig, workers: Optional[int] = None) -> ExperimentReport:
    return ExperimentRunner(config, workers).augmentation_effectiveness()
