#!/usr/bin/env python3
"""
Convert a dataset into a raw-tensor directory (train/ and test/ of .peasimg files).

Usage:
    python scripts/export_raw_tensors.py --format cifar10-binary --path data/cifar-10-batches-bin --out out/cifar
    python scripts/export_raw_tensors.py --config data/configs/desk.json --out out/desk
"""

import argparse
import sys
from pathlib import Path
from typing import List, Optional, Sequence

PROJECT_ROOT = Path(__file__).parent.parent
if str(PROJECT_ROOT) not in sys.path:
    sys.path.insert(0, str(PROJECT_ROOT))

from src.datasets.loaders import load_dataset, write_raw_tensor_dir
from src.datasets.synthetic import generate_synthetic_dataset
from src.harness.config import load_config
from src.utils.config import SUPPORTED_FORMATS
from src.utils.exceptions import PeasError
from src.utils.logger import get_logger, setup_logging

logger = get_logger(__name__)


def export(fmt: str, path: Optional[str], config_path: Optional[str], out: Path, limit: Optional[int]) -> Path:
    """
    Load (or generate) a dataset and write it as a raw-tensor directory.

    Args:
        fmt: Source format; "synthetic" generates from the config's synthetic section.
        path: Source location for file formats.
        config_path: Experiment config used for the synthetic format.
        out: Output directory.
        limit: Keep only the first ``limit`` samples of each split.

    Returns:
        Path: The written directory.
    """
    if fmt == "synthetic":
        config = load_config(config_path)
        logger.info("[1/2] Generating synthetic dataset %s", config.dataset.synthetic)
        train, test = generate_synthetic_dataset(config.dataset.synthetic)
    else:
        if not path:
            raise PeasError(f"--path is required for format '{fmt}'")
        logger.info("[1/2] Loading %s dataset from %s", fmt, path)
        train, test = load_dataset(path, fmt)
    if limit is not None:
        train, test = train[:limit], test[:limit]
    logger.info("[2/2] Writing %d train / %d test samples to %s", len(train), len(test), out)
    return write_raw_tensor_dir(out, train, test)


def main(argv: Optional[Sequence[str]] = None) -> int:
    setup_logging()
    parser = argparse.ArgumentParser(description="Export a dataset as a raw-tensor directory.")
    parser.add_argument("--format", default=None, choices=SUPPORTED_FORMATS,
                        help="Source format (default: synthetic, or the config's dataset format).")
    parser.add_argument("--path", help="Source file or directory.")
    parser.add_argument("-c", "--config", help="Experiment config (for the synthetic generator settings).")
    parser.add_argument("--out", required=True, help="Output directory.")
    parser.add_argument("--limit", type=int, help="Keep only the first N samples per split.")
    args = parser.parse_args(argv)

    fmt = args.format
    path = args.path
    if fmt is None:
        if args.config:
            dataset = load_config(args.config).dataset
            fmt, path = dataset.format, path or dataset.path
        else:
            fmt = "synthetic"
    try:
        root = export(fmt, path, args.config, Path(args.out), args.limit)
    except PeasError as e:
        logger.error("❌ Export failed: %s", e)
        return 2
    logger.info("✅ Export complete")
    print(root)
    return 0


if __name__ == "__main__":
    sys.exit(main())
