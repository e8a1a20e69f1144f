#!/usr/bin/env python3
"""
Command-line entry point of PEAS-lab.

Subcommands:
    gen-data    generate a synthetic dataset as a raw-tensor directory
    train-zoo   train the model zoo and save its checkpoint
    attack      base attacks alone on every role pair
    peas        base attacks vs. PEAS on every role pair
    ablate      every selection strategy, including the victim-aware analysis ones
    sweep-n     ASR over exploration sizes
    sweep-eps   ASR over epsilon budgets
    sweep-aug   ASR per single augmentation
    report      aggregate a run directory into summary.csv

Exit codes: 0 success, 1 usage error, 2 runtime failure. Diagnostics go to
stderr; stdout carries only the paths of produced artifacts.
"""
import argparse
import json
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, NoReturn, Optional, Sequence

# Add project root to Python path
PROJECT_ROOT = Path(__file__).parent.parent
if str(PROJECT_ROOT) not in sys.path:
    sys.path.insert(0, str(PROJECT_ROOT))

from src.attacks.models import ALGORITHMS
from src.datasets.loaders import write_raw_tensor_dir
from src.datasets.synthetic import generate_synthetic_dataset
from src.harness.config import ExperimentConfig, load_config
from src.harness.experiment import ExperimentRunner
from src.harness.report import ExperimentReport, load_report, write_report, write_summary
from src.utils.config import get_workers
from src.utils.exceptions import ConfigError, PeasError, ZooTrainingError
from src.utils.logger import get_logger, setup_logging
from src.zoo.checkpoint import save_zoo
from src.zoo.zoo import train_zoo

logger = get_logger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_FAILURE = 2


class UsageError(Exception):
    """Raised by the argument parser instead of exiting."""


class PeasArgumentParser(argparse.ArgumentParser):
    """ArgumentParser that reports usage errors to main() instead of calling sys.exit(2)."""

    def error(self, message: str) -> NoReturn:
        raise UsageError(f"{self.prog}: {message}")


def _log_exception_cause(e: Exception) -> None:
    """
    Log the cause of an exception if available and not already included in the exception message.
    Checks both e.cause (if set via constructor) and e.__cause__ (if set via 'from e').
    """
    cause = getattr(e, "cause", None) or getattr(e, "__cause__", None)
    if cause:
        cause_str = str(cause)
        if cause_str not in str(e):
            logger.error("   Cause: %s", cause)


def _list_of(kind: Callable[[str], Any]) -> Callable[[str], List[Any]]:
    def parse(text: str) -> List[Any]:
        try:
            return [kind(v) for v in text.split(",") if v.strip()]
        except ValueError as e:
            raise argparse.ArgumentTypeError(f"invalid list '{text}'") from e
    return parse


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("-c", "--config", help="Experiment config file (JSON or YAML).")
    parser.add_argument("--seed", type=int, help="Master seed (overrides the config).")
    parser.add_argument("--workers", type=int, help="Worker threads (default: PEAS_WORKERS or available CPUs).")
    parser.add_argument("--output-dir", help="Directory for reports and generated artifacts.")


def _add_experiment_flags(parser: argparse.ArgumentParser) -> None:
    _add_config_flags(parser)
    parser.add_argument("--zoo-dir", help="Zoo checkpoint directory (trained there if missing).")
    parser.add_argument("--epsilon", type=float, help="L-infinity budget.")
    parser.add_argument("--n", type=int, help="Exploration size.")
    parser.add_argument("--pool-size", type=int, help="Victim-correct samples per victim.")
    parser.add_argument("--attacks", type=_list_of(str), help=f"Comma-separated algorithms ({', '.join(ALGORITHMS)}).")
    parser.add_argument("--samplings", type=_list_of(str), help="Comma-separated sampling modes (S1, S2).")
    parser.add_argument("--dump-candidates", action="store_true", default=None,
                        help="Include per-sample candidate dumps in the JSON report.")


def build_parser() -> PeasArgumentParser:
    parser = PeasArgumentParser(prog="peas", description="PEAS-lab: perceptual exploration for transfer attacks")
    commands = parser.add_subparsers(dest="command", metavar="command")

    gen = commands.add_parser("gen-data", help="Generate a synthetic dataset as a raw-tensor directory.")
    _add_config_flags(gen)
    gen.add_argument("--out", help="Output directory (default: <output-dir>/data).")
    gen.add_argument("--classes", type=int, help="Number of classes.")
    gen.add_argument("--shape", type=int, nargs=3, metavar=("C", "H", "W"), help="Image shape.")
    gen.add_argument("--per-class", type=int, help="Training samples per class.")
    gen.add_argument("--noise", type=float, help="Pixel noise standard deviation.")

    train = commands.add_parser("train-zoo", help="Train the model zoo and save its checkpoint.")
    _add_config_flags(train)
    train.add_argument("--zoo-dir", help="Checkpoint directory.")
    train.add_argument("--epochs", type=int, help="Maximum epochs per model.")
    train.add_argument("--min-accuracy", type=float, help="Held-out accuracy floor.")

    for name, text in (
        ("attack", "Base attacks alone on every role pair."),
        ("peas", "Base attacks vs. PEAS on every role pair."),
        ("ablate", "Every selection strategy (analysis mode)."),
        ("sweep-aug", "PEAS with each single augmentation."),
    ):
        _add_experiment_flags(commands.add_parser(name, help=text))

    sweep_n = commands.add_parser("sweep-n", help="ASR over exploration sizes.")
    _add_experiment_flags(sweep_n)
    sweep_n.add_argument("--n-values", type=_list_of(int), help="Comma-separated exploration sizes.")

    sweep_eps = commands.add_parser("sweep-eps", help="ASR over epsilon budgets.")
    _add_experiment_flags(sweep_eps)
    sweep_eps.add_argument("--eps-values", type=_list_of(float), help="Comma-separated budgets.")

    report = commands.add_parser("report", help="Aggregate a run directory into summary.csv.")
    report.add_argument("run_dir", help="Run directory written by an experiment command.")
    return parser


def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
    """Flag values mapped onto config keys; unset flags stay None and are skipped."""
    def get(name: str) -> Any:
        return getattr(args, name, None)

    shape = get("shape")
    return {
        "seed": get("seed"),
        "workers": get("workers"),
        "output_dir": get("output_dir"),
        "zoo.dir": get("zoo_dir"),
        "zoo.epochs": get("epochs"),
        "zoo.min_accuracy": get("min_accuracy"),
        "epsilon": get("epsilon"),
        "n": get("n"),
        "pool_size": get("pool_size"),
        "attacks": get("attacks"),
        "samplings": get("samplings"),
        "dump_candidates": get("dump_candidates"),
        "sweeps.n_values": get("n_values"),
        "sweeps.epsilon_values": get("eps_values"),
        "dataset.synthetic.classes": get("classes"),
        "dataset.synthetic.shape": list(shape) if shape else None,
        "dataset.synthetic.per_class": get("per_class"),
        "dataset.synthetic.noise": get("noise"),
        "dataset.synthetic.seed": get("seed") if get("command") == "gen-data" else None,
    }


def _resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    config = load_config(args.config, _overrides(args))
    logger.info("Resolved configuration (hash %s):", config.config_hash[:12])
    logger.info("%s", json.dumps(config.to_dict(), indent=2, sort_keys=True))
    logger.info("Master seed: %d", config.seed)
    return config


def _gen_data(args: argparse.Namespace, config: ExperimentConfig) -> List[Path]:
    spec = config.dataset.synthetic
    out = Path(args.out) if args.out else Path(config.output_dir) / "data"
    logger.info("[1/2] Generating %d classes of shape %s (seed %d)", spec.classes, spec.shape, spec.seed)
    train, test = generate_synthetic_dataset(spec)
    logger.info("[2/2] Writing %d train / %d test samples to %s", len(train), len(test), out)
    return [write_raw_tensor_dir(out, train, test)]


def _train_zoo(args: argparse.Namespace, config: ExperimentConfig) -> List[Path]:
    runner = ExperimentRunner(config, args.workers)
    logger.info("[1/2] Preparing data")
    profile, train, test = runner.prepare_data()
    logger.info("[2/2] Training %d models", len(config.zoo.architectures))
    zoo = train_zoo(profile, train, test, config.zoo, workers=runner.workers)
    for arch_id in zoo.ids:
        logger.info("   %-10s held-out accuracy %.3f", arch_id, zoo.accuracy(arch_id))
    return [save_zoo(zoo, config.zoo_dir)]


def _experiment(
    args: argparse.Namespace, config: ExperimentConfig, run: Callable[[ExperimentRunner], ExperimentReport]
) -> List[Path]:
    runner = ExperimentRunner(config, args.workers)
    report = run(runner)
    return [write_report(report, Path(config.output_dir) / "reports")]


def _report(args: argparse.Namespace) -> List[Path]:
    report = load_report(args.run_dir)
    logger.info("Report %s: %d rows over %d pairs", report.kind, len(report.rows), len(report.metadata.get("pairs", [])))
    logger.info("%-26s %-18s %-8s %-8s %-5s %-9s %-9s", "strategy", "sampling", "attack", "epsilon", "n", "macro", "micro")
    for entry in report.aggregates:
        logger.info("%-26s %-18s %-8s %-8.4f %-5d %-9.3f %-9.3f", entry["strategy"], entry["sampling"],
                    entry["attack"], entry["epsilon"], entry["n"], entry["macro_asr"], entry["micro_asr"])
    for boost in report.boosts:
        if boost["boost"] is not None:
            logger.info("%s (%s, n=%d): %.2fx over the base attack", boost["name"], boost["sampling"], boost["n"], boost["boost"])
    return [write_summary(report, args.run_dir)]


COMMANDS: Dict[str, Callable[[argparse.Namespace, ExperimentConfig], List[Path]]] = {
    "gen-data": _gen_data,
    "train-zoo": _train_zoo,
    "attack": lambda a, c: _experiment(a, c, lambda r: r.run_attacks()),
    "peas": lambda a, c: _experiment(a, c, lambda r: r.run_pairwise()),
    "ablate": lambda a, c: _experiment(a, c, lambda r: r.ablate()),
    "sweep-n": lambda a, c: _experiment(a, c, lambda r: r.sweep_n()),
    "sweep-eps": lambda a, c: _experiment(a, c, lambda r: r.sweep_epsilon()),
    "sweep-aug": lambda a, c: _experiment(a, c, lambda r: r.augmentation_effectiveness()),
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Run one subcommand.

    Args:
        argv: Arguments without the program name (defaults to sys.argv[1:]).

    Returns:
        0 on success, 1 on a usage error, 2 on a runtime failure.
    """
    setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        parser.print_usage(sys.stderr)
        logger.error("❌ %s", e)
        return EXIT_USAGE
    except SystemExit as e:
        # --help
        return int(e.code or 0)
    if not args.command:
        parser.print_usage(sys.stderr)
        logger.error("❌ A command is required. Run with --help for the list of commands.")
        return EXIT_USAGE
    if getattr(args, "workers", None) is not None and args.workers < 1:
        parser.print_usage(sys.stderr)
        logger.error("❌ --workers must be >= 1")
        return EXIT_USAGE

    logger.info("🚀 peas %s", args.command)
    logger.info("=" * 60)
    try:
        if args.command == "report":
            paths = _report(args)
        else:
            config = _resolve_config(args)
            if args.workers is None:
                args.workers = config.workers or get_workers()
            paths = COMMANDS[args.command](args, config)
    except ConfigError as e:
        logger.error("❌ Configuration error:\n%s", e)
        _log_exception_cause(e)
        return EXIT_FAILURE
    except ZooTrainingError as e:
        logger.error("❌ Zoo training failed: %s", e)
        logger.error("   Raise zoo.epochs or lower zoo.min_accuracy for: %s", ", ".join(e.failed))
        return EXIT_FAILURE
    except PeasError as e:
        logger.error("❌ %s failed: %s", args.command, e)
        _log_exception_cause(e)
        return EXIT_FAILURE

    for path in paths:
        print(path)
    logger.info("✅ %s completed", args.command)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
