"""
Zoo checkpoints.

Layout of a checkpoint directory::

    manifest.json              format version, dataset profile, per-model layers and parameter index
    <arch_id>/<layer>_<name>.f32   one little-endian float32 blob per parameter tensor

The manifest is canonical JSON; blobs are raw row-major data with no header,
so their size must equal 4 * prod(shape).
"""

from pathlib import Path
from typing import Any, Dict, List

import numpy as np

from src.datasets.models import DatasetProfile
from src.nn.network import Network
from src.utils.common_functions import PathLike, read_bytes, read_json, write_bytes, write_json
from src.utils.exceptions import CheckpointError, DatasetError, PeasError, ShapeError
from src.utils.logger import get_logger
from src.zoo.models import ModelZoo, ZooEntry

logger = get_logger(__name__)

FORMAT_VERSION = 1
MANIFEST = "manifest.json"
BLOB_DTYPE = np.dtype("<f4")


def save_zoo(zoo: ModelZoo, directory: PathLike) -> Path:
    """
    Write a zoo checkpoint.

    Returns:
        Path to the written manifest.

    Raises:
        CheckpointError: If any file cannot be written.
    """
    root = Path(directory)
    models: List[Dict[str, Any]] = []
    try:
        for entry in zoo.entries:
            params = []
            for layer_index, name, value in entry.network.named_parameters():
                rel = f"{entry.arch_id}/{layer_index:02d}_{name}.f32"
                write_bytes(root / rel, np.ascontiguousarray(value, dtype=BLOB_DTYPE).tobytes())
                params.append({"layer": layer_index, "name": name, "shape": list(value.shape), "file": rel})
            models.append({
                "arch_id": entry.arch_id,
                "accuracy": entry.accuracy,
                "input_shape": list(entry.network.input_shape),
                "num_classes": entry.network.num_classes,
                "layers": entry.network.layer_configs(),
                "params": params,
            })
        manifest = {"format_version": FORMAT_VERSION, "profile": zoo.profile.to_dict(), "models": models}
        write_json(root / MANIFEST, manifest)
    except PeasError as e:
        raise CheckpointError(f"Failed to write zoo checkpoint to {root}", cause=e) from e
    logger.info("Saved %d models to %s", len(zoo), root)
    return root / MANIFEST


def _load_model(root: Path, spec: Dict[str, Any]) -> ZooEntry:
    arch_id = spec["arch_id"]
    net = Network.from_layer_configs(
        arch_id, spec["input_shape"], spec["num_classes"], spec["layers"], seed=None
    )
    params: List[Dict[str, np.ndarray]] = [{} for _ in net.layers]
    for p in spec["params"]:
        shape = tuple(int(d) for d in p["shape"])
        blob = read_bytes(root / p["file"])
        expected = int(np.prod(shape, dtype=np.int64)) * BLOB_DTYPE.itemsize
        if len(blob) != expected:
            raise CheckpointError(
                f"Parameter blob {p['file']} is truncated or corrupt: {len(blob)} bytes, expected {expected}"
            )
        params[int(p["layer"])][p["name"]] = np.frombuffer(blob, dtype=BLOB_DTYPE).astype(np.float32).reshape(shape)
    # freshly initialised copy gives the expected tensor names and shapes
    reference = Network.from_layer_configs(arch_id, spec["input_shape"], spec["num_classes"], spec["layers"])
    expected_names = [sorted(layer.params) for layer in reference.layers]
    if [sorted(p) for p in params] != expected_names:
        raise CheckpointError(f"Checkpoint for '{arch_id}' is missing parameter tensors")
    for ref_layer, layer_params in zip(reference.layers, params):
        for name, value in layer_params.items():
            if ref_layer.params[name].shape != value.shape:
                raise CheckpointError(
                    f"Parameter {name} of '{arch_id}' has shape {value.shape}, expected {ref_layer.params[name].shape}"
                )
    return ZooEntry(arch_id=arch_id, network=net.with_parameters(params), accuracy=float(spec["accuracy"]))


def load_zoo(directory: PathLike) -> ModelZoo:
    """
    Load a zoo checkpoint written by ``save_zoo``.

    Raises:
        CheckpointError: On a missing or malformed manifest, a format-version
            mismatch, or a truncated parameter blob.
    """
    root = Path(directory)
    try:
        manifest = read_json(root / MANIFEST)
    except PeasError as e:
        raise CheckpointError(f"Cannot read zoo manifest in {root}", cause=e) from e
    version = manifest.get("format_version") if isinstance(manifest, dict) else None
    if version != FORMAT_VERSION:
        raise CheckpointError(f"Unsupported checkpoint format version {version!r} in {root} (expected {FORMAT_VERSION})")
    try:
        profile = DatasetProfile.from_dict(manifest["profile"])
        entries = tuple(_load_model(root, spec) for spec in manifest["models"])
    except CheckpointError:
        raise
    except (KeyError, IndexError, TypeError, ValueError, ShapeError, DatasetError) as e:
        raise CheckpointError(f"Malformed zoo manifest in {root}: {e}", cause=e) from e
    except PeasError as e:
        raise CheckpointError(f"Cannot read zoo checkpoint in {root}", cause=e) from e
    logger.info("Loaded %d models from %s", len(entries), root)
    return ModelZoo(profile=profile, entries=entries)
