#!/usr/bin/env python3
"""
Application Configuration Module

Loads process-level configuration from .env file or environment variables.
Handles worker count, output root and external-attack timeout; experiment
settings live in JSON config files (see src/harness/config.py).
"""

import os
from typing import Optional
from dotenv import load_dotenv

# Load .env file if it exists, otherwise try .env.example
if os.path.exists(".env"):
    load_dotenv(".env")
elif os.path.exists(".env.example"):
    load_dotenv(".env.example")

SUPPORTED_FORMATS = ["synthetic", "cifar10-binary", "idx", "raw-tensor-dir"]
SUPPORTED_ARCHITECTURES = ["cnn-a", "cnn-b", "cnn-wide", "mlp", "cnn-pool"]
PRESET_IDS = ["high-res", "low-res"]

ATTACK_ALGORITHMS = ["fgsm", "pgd", "timi", "simba", "external"]
EXTERNAL_MODES = ["transfer", "query"]
AUGMENTATION_IDS = ["random-affine", "color-jitter", "random-crop", "gaussian-blur", "sharpness", "autocontrast"]
SAMPLING_IDS = ["S1", "S2", "noise"]
SELECTION_STRATEGIES = [
    "top1-adversarial",
    "top1-augmented",
    "random-augmented",
    "random-adversarial",
    "oracle-perfect",
    "filtered-top1-adversarial",
    "filtered-top1-augmented",
]
HARNESS_STRATEGIES = ["baseline", "vanilla", *SELECTION_STRATEGIES]

DEFAULT_OUTPUT_ROOT = "output"
DEFAULT_EXTERNAL_TIMEOUT = 300


def _int_from_env(name: str) -> Optional[int]:
    """
    Read a positive integer from the environment.

    Args:
        name: Environment variable name.

    Returns:
        The parsed value, or None when unset, empty or not a positive integer.
    """
    raw = os.getenv(name, "").strip().strip('"').strip("'")
    if not raw:
        return None
    try:
        value = int(raw)
    except ValueError:
        return None
    return value if value > 0 else None


def get_workers() -> int:
    """
    Get the worker-pool size from PEAS_WORKERS.

    Returns:
        Number of workers. Defaults to the available parallelism of the process.
    """
    configured = _int_from_env("PEAS_WORKERS")
    if configured:
        return configured
    try:
        return max(1, len(os.sched_getaffinity(0)))
    except AttributeError:
        return max(1, os.cpu_count() or 1)


def get_output_root() -> str:
    """
    Get the root directory for generated data, zoos and reports.

    Returns:
        Directory path from PEAS_OUTPUT_DIR, or "output".
    """
    path = os.getenv("PEAS_OUTPUT_DIR", DEFAULT_OUTPUT_ROOT)
    return path.strip('"').strip("'") or DEFAULT_OUTPUT_ROOT


def get_external_attack_timeout() -> int:
    """
    Get the timeout (seconds) applied to external attack commands.

    Returns:
        Timeout from PEAS_EXTERNAL_TIMEOUT, or 300.
    """
    return _int_from_env("PEAS_EXTERNAL_TIMEOUT") or DEFAULT_EXTERNAL_TIMEOUT
