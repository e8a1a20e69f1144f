"""
Common utility functions for PEAS-lab.

This module provides reusable helpers for file and path handling
(text, JSON/YAML and binary blobs) and for deriving reproducible
random streams, shared across multiple parts of the project.
"""

import json
import os
import zlib
from pathlib import Path
from typing import Any, Dict, Union

import numpy as np
import yaml

from src.utils.exceptions import PeasError

PathLike = Union[str, os.PathLike]


def read_file(file_name: PathLike) -> str:
    """
    Read text from a file (UTF-8).

    Args:
        file_name: The path to the file to be read.

    Returns:
        str: The contents of the file, decoded as UTF-8.

    Raises:
        PeasError: If file cannot be read (not found, permission denied, encoding error).
    """
    try:
        with open(file_name, "r", encoding="utf-8") as f:
            return f.read()
    except FileNotFoundError as e:
        raise PeasError(f"File not found: {file_name}") from e
    except PermissionError as e:
        raise PeasError(f"Permission denied reading file: {file_name}") from e
    except UnicodeDecodeError as e:
        raise PeasError(f"Failed to decode file as UTF-8: {file_name}") from e
    except OSError as e:
        raise PeasError(f"OS error while reading file: {file_name}") from e


def write_file_text(file_name: PathLike, data: str) -> None:
    """
    Write text data to a file (UTF-8), creating parent directories.

    Args:
        file_name: The path to the file to be written.
        data: The string data to write to the file.

    Raises:
        PeasError: If file cannot be written (permission denied, disk full, etc.).
    """
    try:
        Path(file_name).parent.mkdir(parents=True, exist_ok=True)
        with open(file_name, "w", encoding="utf-8", newline="\n") as f:
            f.write(data)
    except PermissionError as e:
        raise PeasError(f"Permission denied writing file: {file_name}") from e
    except OSError as e:
        raise PeasError(f"OS error while writing file: {file_name}") from e


def read_bytes(file_name: PathLike) -> bytes:
    """
    Read a whole binary file.

    Raises:
        PeasError: If the file cannot be read.
    """
    try:
        with open(file_name, "rb") as f:
            return f.read()
    except FileNotFoundError as e:
        raise PeasError(f"File not found: {file_name}") from e
    except PermissionError as e:
        raise PeasError(f"Permission denied reading file: {file_name}") from e
    except OSError as e:
        raise PeasError(f"OS error while reading file: {file_name}") from e


def write_bytes(file_name: PathLike, data: bytes) -> None:
    """
    Write a binary file, creating parent directories.

    Raises:
        PeasError: If the file cannot be written.
    """
    try:
        Path(file_name).parent.mkdir(parents=True, exist_ok=True)
        with open(file_name, "wb") as f:
            f.write(data)
    except PermissionError as e:
        raise PeasError(f"Permission denied writing file: {file_name}") from e
    except OSError as e:
        raise PeasError(f"OS error while writing file: {file_name}") from e


def read_yml(file_path: PathLike) -> Dict[str, Any]:
    """
    Read and parse a YAML (or JSON) file, returning its data as a Python dictionary.

    JSON is a subset of YAML, so experiment configs in either syntax load here.

    Args:
        file_path: The path to the YAML/JSON file.

    Returns:
        Dict[str, Any]: The parsed data (empty dict for an empty file).

    Raises:
        PeasError: If file cannot be read, parsing fails or the top level is not a mapping.
    """
    try:
        with open(file_path, "r", encoding="utf-8") as file:
            data = yaml.safe_load(file)
    except FileNotFoundError as e:
        raise PeasError(f"Config file not found: {file_path}") from e
    except PermissionError as e:
        raise PeasError(f"Permission denied reading config file: {file_path}") from e
    except yaml.YAMLError as e:
        raise PeasError(f"Failed to parse config file: {file_path}") from e
    except OSError as e:
        raise PeasError(f"OS error while reading config file: {file_path}") from e
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise PeasError(f"Config file must contain a mapping at the top level: {file_path}")
    return data


def read_json(file_path: PathLike) -> Any:
    """
    Read and parse a JSON file.

    Raises:
        PeasError: If the file cannot be read or is not valid JSON.
    """
    content = read_file(file_path)
    try:
        return json.loads(content)
    except json.JSONDecodeError as e:
        raise PeasError(f"Failed to parse JSON file: {file_path} ({e.msg} at line {e.lineno})") from e


def write_json(file_path: PathLike, data: Any) -> None:
    """
    Write data as canonical JSON (sorted keys, two-space indent, trailing newline).

    Canonical output keeps reports byte-identical across identical runs.

    Raises:
        PeasError: If the file cannot be written.
    """
    write_file_text(file_path, json.dumps(data, indent=2, sort_keys=True) + "\n")


def stable_int(key: Union[int, str]) -> int:
    """
    Map an int or string key to a non-negative 32-bit integer, identical across processes.

    Python's built-in hash() is salted per process, so strings go through CRC-32.
    """
    if isinstance(key, (int, np.integer)):
        return int(key) & 0xFFFFFFFF
    return zlib.crc32(str(key).encode("utf-8"))


def derive_seed(master_seed: int, *keys: Union[int, str]) -> np.random.SeedSequence:
    """
    Derive an independent seed sequence from a master seed and a path of keys.

    All experiment randomness flows through this function, keyed by e.g.
    (pair id, sample id, stream tag), so results do not depend on scheduling.

    Args:
        master_seed: Master seed of the run.
        *keys: Identifiers (ints or strings) naming the stream.

    Returns:
        np.random.SeedSequence: Seed sequence for np.random.default_rng().
    """
    return np.random.SeedSequence([stable_int(master_seed), *[stable_int(k) for k in keys]])


def derive_rng(master_seed: int, *keys: Union[int, str]) -> np.random.Generator:
    """Shorthand for ``np.random.default_rng(derive_seed(master_seed, *keys))``."""
    return np.random.default_rng(derive_seed(master_seed, *keys))
