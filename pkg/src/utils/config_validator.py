#!/usr/bin/env python3
"""
Configuration Validator Module

Validates experiment configuration and logging settings before any side
effect, so errors surface early with one clear message per bad field.
"""

import os
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from src.utils.config import (
    ATTACK_ALGORITHMS,
    AUGMENTATION_IDS,
    EXTERNAL_MODES,
    HARNESS_STRATEGIES,
    PRESET_IDS,
    SAMPLING_IDS,
    SUPPORTED_ARCHITECTURES,
    SUPPORTED_FORMATS,
)
from src.utils.exceptions import ConfigError
from src.utils.logger import get_logger

logger = get_logger(__name__)

TOP_LEVEL_KEYS = {
    "dataset", "zoo", "pool_size", "epsilon", "n", "samplings", "strategies", "attack", "attacks",
    "sweeps", "augmentation", "bootstrap", "seed", "output_dir", "workers", "dump_candidates",
}
DATASET_KEYS = {"name", "format", "path", "preset", "classes", "synthetic"}
ZOO_KEYS = {"dir", "architectures", "epochs", "lr", "batch_size", "min_accuracy", "seed"}
SWEEP_KEYS = {"n_values", "epsilon_values", "augmentations"}
BOOTSTRAP_KEYS = {"resamples", "confidence"}


def _is_int(value: Any) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


def _is_number(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _check_keys(section: str, data: Dict[str, Any], allowed: set) -> None:
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise ValueError(f"{section}: unknown field(s) {', '.join(unknown)}")


def _check_mapping(name: str, value: Any) -> Dict[str, Any]:
    if not isinstance(value, dict):
        raise ValueError(f"{name}: expected a mapping, got {type(value).__name__}")
    return value


def _check_int(name: str, value: Any, minimum: int) -> None:
    if not _is_int(value) or value < minimum:
        raise ValueError(f"{name}: expected an integer >= {minimum}, got {value!r}")


def _check_fraction(name: str, value: Any, low_open: bool = False) -> None:
    if not _is_number(value) or value > 1 or value < 0 or (low_open and value == 0):
        bound = "(0, 1]" if low_open else "[0, 1]"
        raise ValueError(f"{name}: expected a number in {bound}, got {value!r}")


def _check_choices(name: str, values: Any, choices: Tuple[str, ...] | List[str]) -> None:
    if not isinstance(values, list) or not values:
        raise ValueError(f"{name}: expected a non-empty list")
    bad = [v for v in values if v not in choices]
    if bad:
        raise ValueError(f"{name}: unknown value(s) {', '.join(map(str, bad))}. Valid: {', '.join(choices)}")


def _validate_dataset(dataset: Dict[str, Any]) -> None:
    _check_keys("dataset", dataset, DATASET_KEYS)
    fmt = dataset.get("format", "synthetic")
    if fmt not in SUPPORTED_FORMATS:
        raise ValueError(f"dataset.format: '{fmt}' is not supported. Valid: {', '.join(SUPPORTED_FORMATS)}")
    if fmt != "synthetic" and not dataset.get("path"):
        raise ValueError(f"dataset.path: required for format '{fmt}'")
    preset = dataset.get("preset")
    if preset is not None and preset not in PRESET_IDS:
        raise ValueError(f"dataset.preset: '{preset}' is not valid. Valid: {', '.join(PRESET_IDS)}")
    if dataset.get("classes") is not None:
        _check_int("dataset.classes", dataset["classes"], 2)
    synthetic = _check_mapping("dataset.synthetic", dataset.get("synthetic", {}))
    if "classes" in synthetic:
        _check_int("dataset.synthetic.classes", synthetic["classes"], 2)
    if "per_class" in synthetic:
        _check_int("dataset.synthetic.per_class", synthetic["per_class"], 2)
    if "shape" in synthetic:
        shape = synthetic["shape"]
        if not isinstance(shape, list) or len(shape) != 3 or not all(_is_int(d) and d > 0 for d in shape):
            raise ValueError(f"dataset.synthetic.shape: expected [C, H, W] of positive integers, got {shape!r}")


def _validate_zoo(zoo: Dict[str, Any]) -> None:
    _check_keys("zoo", zoo, ZOO_KEYS)
    if "architectures" in zoo:
        _check_choices("zoo.architectures", zoo["architectures"], SUPPORTED_ARCHITECTURES)
        if len(set(zoo["architectures"])) != len(zoo["architectures"]):
            raise ValueError("zoo.architectures: ids must be distinct")
        if len(zoo["architectures"]) < 3:
            raise ValueError("zoo.architectures: at least 3 models are needed (victim, surrogate, ranking set)")
    for key, minimum in (("epochs", 1), ("batch_size", 1), ("seed", 0)):
        if key in zoo:
            _check_int(f"zoo.{key}", zoo[key], minimum)
    if "lr" in zoo and (not _is_number(zoo["lr"]) or zoo["lr"] <= 0):
        raise ValueError(f"zoo.lr: expected a number > 0, got {zoo['lr']!r}")
    if "min_accuracy" in zoo:
        _check_fraction("zoo.min_accuracy", zoo["min_accuracy"])


def _validate_attack(attack: Dict[str, Any], name: str = "attack") -> None:
    algorithm = attack.get("algorithm", "pgd")
    if algorithm not in ATTACK_ALGORITHMS:
        raise ValueError(f"{name}.algorithm: '{algorithm}' is not valid. Valid: {', '.join(ATTACK_ALGORITHMS)}")
    if "steps" in attack:
        _check_int(f"{name}.steps", attack["steps"], 1)
    step_size = attack.get("step_size")
    if step_size is not None and (not _is_number(step_size) or step_size <= 0):
        raise ValueError(f"{name}.step_size: expected a number > 0 or null, got {step_size!r}")
    external = _check_mapping(f"{name}.external", attack.get("external", {}))
    command = external.get("command")
    if command is not None and (not isinstance(command, list) or not all(isinstance(c, str) for c in command)):
        raise ValueError(f"{name}.external.command: expected a list of strings")
    mode = external.get("mode", "transfer")
    if mode not in EXTERNAL_MODES:
        raise ValueError(f"{name}.external.mode: '{mode}' is not valid. Valid: {', '.join(EXTERNAL_MODES)}")
    if "max_queries" in external:
        _check_int(f"{name}.external.max_queries", external["max_queries"], 0)
    simba = _check_mapping(f"{name}.simba", attack.get("simba", {}))
    if "max_queries" in simba:
        _check_int(f"{name}.simba.max_queries", simba["max_queries"], 0)
    _check_mapping(f"{name}.timi", attack.get("timi", {}))


def validate_experiment_config_dict(config: Dict[str, Any]) -> bool:
    """
    Validate an experiment configuration mapping.

    Args:
        config: Parsed configuration file (after flag overrides).

    Returns:
        True if valid, raises ValueError naming the first bad field if invalid.
    """
    _check_mapping("config", config)
    _check_keys("config", config, TOP_LEVEL_KEYS)

    _validate_dataset(_check_mapping("dataset", config.get("dataset", {})))
    _validate_zoo(_check_mapping("zoo", config.get("zoo", {})))

    for key, minimum in (("pool_size", 0), ("n", 1), ("seed", 0)):
        if key in config:
            _check_int(key, config[key], minimum)
    if config.get("epsilon") is not None:
        _check_fraction("epsilon", config["epsilon"])
    if config.get("workers") is not None:
        _check_int("workers", config["workers"], 1)
    if "dump_candidates" in config and not isinstance(config["dump_candidates"], bool):
        raise ValueError("dump_candidates: expected true or false")
    if "output_dir" in config and not isinstance(config["output_dir"], str):
        raise ValueError("output_dir: expected a path string")

    if "samplings" in config:
        _check_choices("samplings", config["samplings"], [m for m in SAMPLING_IDS if m != "noise"])
    if "strategies" in config:
        _check_choices("strategies", config["strategies"], HARNESS_STRATEGIES)

    attack = _check_mapping("attack", config.get("attack", {}))
    _validate_attack(attack)
    if "attacks" in config:
        _check_choices("attacks", config["attacks"], ATTACK_ALGORITHMS)
        for algorithm in config["attacks"]:
            _validate_attack({**attack, "algorithm": algorithm}, name=f"attacks[{algorithm}]")
            if algorithm == "external" and not attack.get("external", {}).get("command"):
                raise ValueError("attack.external.command: required when 'external' is among the attacks")

    sweeps = _check_mapping("sweeps", config.get("sweeps", {}))
    _check_keys("sweeps", sweeps, SWEEP_KEYS)
    if "n_values" in sweeps:
        values = sweeps["n_values"]
        if not isinstance(values, list) or not values or not all(_is_int(v) and v >= 1 for v in values):
            raise ValueError("sweeps.n_values: expected a non-empty list of integers >= 1")
    if "epsilon_values" in sweeps:
        values = sweeps["epsilon_values"]
        if not isinstance(values, list) or not values or not all(_is_number(v) and 0 <= v <= 1 for v in values):
            raise ValueError("sweeps.epsilon_values: expected a non-empty list of numbers in [0, 1]")
    if "augmentations" in sweeps:
        _check_choices("sweeps.augmentations", sweeps["augmentations"], AUGMENTATION_IDS)

    _check_mapping("augmentation", config.get("augmentation", {}))

    bootstrap = _check_mapping("bootstrap", config.get("bootstrap", {}))
    _check_keys("bootstrap", bootstrap, BOOTSTRAP_KEYS)
    if "resamples" in bootstrap:
        _check_int("bootstrap.resamples", bootstrap["resamples"], 1)
    if "confidence" in bootstrap:
        _check_fraction("bootstrap.confidence", bootstrap["confidence"], low_open=True)
    return True


def validate_logging_config() -> Tuple[bool, Optional[str]]:
    """
    Validate logging configuration from environment variables.

    Returns:
        Tuple of (is_valid, error_message)
        - is_valid: True if logging config is valid
        - error_message: Error message if invalid, None if valid
    """
    log_level = os.getenv("LOG_LEVEL", "INFO").upper()
    valid_levels = {"DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"}
    if log_level not in valid_levels:
        return False, (
            f"Invalid LOG_LEVEL: '{log_level}'. "
            f"Must be one of: {', '.join(sorted(valid_levels))}"
        )

    log_format = os.getenv("LOG_FORMAT", "default").lower()
    valid_formats = {"default", "json"}
    if log_format not in valid_formats:
        return False, (
            f"Invalid LOG_FORMAT: '{log_format}'. "
            f"Must be one of: {', '.join(sorted(valid_formats))}"
        )

    verbose_console = os.getenv("LOG_VERBOSE_CONSOLE", "false").lower()
    if verbose_console not in {"true", "false"}:
        return False, (
            f"Invalid LOG_VERBOSE_CONSOLE: '{verbose_console}'. "
            f"Must be 'true' or 'false'"
        )

    log_file = os.getenv("LOG_FILE")
    if log_file:
        try:
            Path(log_file)
        except (ValueError, OSError) as e:
            return False, f"Invalid LOG_FILE path: '{log_file}'. Error: {str(e)}"

    return True, None


def validate_all_config(config: Dict[str, Any]) -> Tuple[bool, List[str]]:
    """
    Validate the experiment config and the logging environment.

    Returns:
        Tuple of (is_valid, error_messages)
    """
    errors: List[str] = []

    try:
        validate_experiment_config_dict(config)
    except ValueError as e:
        errors.append(f"❌ Experiment Configuration Error:\n{e}")

    logging_valid, logging_error = validate_logging_config()
    if not logging_valid:
        errors.append(f"❌ Logging Configuration Error:\n{logging_error}")

    return len(errors) == 0, errors


def validate_and_raise(config: Dict[str, Any]) -> None:
    """
    Validate all configuration; the CLI calls this before any side effect.

    Raises:
        ConfigError: With every error message joined.
    """
    is_valid, errors = validate_all_config(config)
    if not is_valid:
        raise ConfigError("\n\n".join(errors))
