"""
Dataset loaders for the supported on-disk formats.

- ``cifar10-binary``: records of 1 label byte + 3072 pixel bytes (row-major RGB planes).
- ``idx``: big-endian IDX files (magic ``00 00 <dtype> <ndim>``), paired images/labels.
- ``raw-tensor-dir``: one ``.peasimg`` file per sample, little-endian header
  ``b"PEASIMG1"`` + u32 C, H, W + u32 label, then C*H*W f32 pixels.

All loaders return ``(train, test)`` lists of LabeledSample with pixels in [0, 1]
and keep the split encoded on disk.
"""

import struct
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.nn.tensor import LabeledSample
from src.utils.common_functions import PathLike, read_bytes, write_bytes
from src.utils.config import SUPPORTED_FORMATS
from src.utils.exceptions import DatasetError, DatasetFormatError, PeasError
from src.utils.logger import get_logger

logger = get_logger(__name__)

Split = List[LabeledSample]

CIFAR_SHAPE = (3, 32, 32)
CIFAR_RECORD = 1 + 3 * 32 * 32
CIFAR_CLASSES = 10

IDX_DTYPES: Dict[int, str] = {
    0x08: ">u1",
    0x09: ">i1",
    0x0B: ">i2",
    0x0C: ">i4",
    0x0D: ">f4",
    0x0E: ">f8",
}

# header byte holding the number of dimensions
IDX_NDIM_OFFSET = 3

RAW_MAGIC = b"PEASIMG1"
RAW_HEADER = struct.Struct("<8sIIII")
RAW_SUFFIX = ".peasimg"
RAW_LABEL_OFFSET = 8 + 4 * 3


def _read(path: Path) -> bytes:
    try:
        return read_bytes(path)
    except PeasError as e:
        raise DatasetError(f"Cannot read dataset file {path}", cause=e) from e


def _to_samples(images: np.ndarray, labels: np.ndarray) -> Split:
    return [
        LabeledSample(image=images[i], label=int(labels[i]), sample_id=i)
        for i in range(len(labels))
    ]


# ---------------------------------------------------------------------------
# CIFAR-10 binary
# ---------------------------------------------------------------------------

def read_cifar_batch(path: PathLike, num_classes: int = CIFAR_CLASSES) -> Tuple[np.ndarray, np.ndarray]:
    """
    Parse one CIFAR-10 binary batch file.

    Returns:
        (images of shape (N, 3, 32, 32) scaled to [0, 1], int64 labels)

    Raises:
        DatasetFormatError: On a truncated record or a label byte >= num_classes (10 at most).
    """
    data = _read(Path(path))
    complete = len(data) // CIFAR_RECORD
    if complete * CIFAR_RECORD != len(data):
        raise DatasetFormatError(
            f"Truncated CIFAR-10 record in {path}: {len(data)} bytes is not a multiple of {CIFAR_RECORD}",
            offset=complete * CIFAR_RECORD,
        )
    records = np.frombuffer(data, dtype=np.uint8).reshape(complete, CIFAR_RECORD)
    labels = records[:, 0].astype(np.int64)
    bad = np.flatnonzero(labels >= min(num_classes, CIFAR_CLASSES))
    if bad.size:
        raise DatasetFormatError(
            f"Invalid CIFAR-10 label {labels[bad[0]]} in {path}", offset=int(bad[0]) * CIFAR_RECORD
        )
    images = records[:, 1:].reshape(complete, *CIFAR_SHAPE).astype(np.float32) / 255.0
    return images, labels


def load_cifar10_binary(path: PathLike, num_classes: Optional[int] = None) -> Tuple[Split, Split]:
    """
    Load a CIFAR-10 binary directory (``data_batch_*.bin`` + ``test_batch.bin``) or a single batch file.

    A single file whose name starts with ``test_batch`` becomes the test split,
    any other single file the training split.
    """
    root = Path(path)
    if root.is_file():
        train_files = [] if root.name.startswith("test_batch") else [root]
        test_files = [root] if root.name.startswith("test_batch") else []
    else:
        train_files = sorted(root.glob("data_batch_*.bin"))
        test_files = sorted(root.glob("test_batch*.bin"))
        if not train_files and not test_files:
            raise DatasetError(f"No CIFAR-10 batch files found in {root}")

    def load(files: Sequence[Path]) -> Split:
        if not files:
            return []
        parts = [read_cifar_batch(f, num_classes or CIFAR_CLASSES) for f in files]
        return _to_samples(np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts]))

    return load(train_files), load(test_files)


# ---------------------------------------------------------------------------
# IDX
# ---------------------------------------------------------------------------

def read_idx(path: PathLike) -> np.ndarray:
    """
    Parse an IDX file into an array with its native dtype and dimensions.

    Raises:
        DatasetFormatError: On a bad magic number, unknown dtype code or truncated payload.
    """
    data = _read(Path(path))
    if len(data) < 4:
        raise DatasetFormatError(f"IDX header truncated in {path}", offset=len(data))
    zero, dtype_code, ndim = struct.unpack(">HBB", data[:4])
    if zero != 0:
        raise DatasetFormatError(f"Bad IDX magic number in {path}", offset=0)
    if dtype_code not in IDX_DTYPES:
        raise DatasetFormatError(f"Unknown IDX dtype code 0x{dtype_code:02x} in {path}", offset=2)
    header_end = 4 + 4 * ndim
    if len(data) < header_end:
        raise DatasetFormatError(f"IDX dimension header truncated in {path}", offset=len(data))
    dims = struct.unpack(f">{ndim}I", data[4:header_end])
    dtype = np.dtype(IDX_DTYPES[dtype_code])
    expected = int(np.prod(dims, dtype=np.int64)) * dtype.itemsize
    available = len(data) - header_end
    if available < expected:
        raise DatasetFormatError(
            f"IDX payload truncated in {path}: expected {expected} bytes, found {available}",
            offset=len(data),
        )
    if available > expected:
        logger.warning("Ignoring %d trailing bytes in %s", available - expected, path)
    return np.frombuffer(data, dtype=dtype, count=int(np.prod(dims)), offset=header_end).reshape(dims)


def _idx_header_size(array: np.ndarray) -> int:
    return 4 + 4 * array.ndim


def _idx_images(array: np.ndarray, path: Path) -> np.ndarray:
    if array.ndim == 3:
        images = array[:, None, :, :]
    elif array.ndim == 4:
        # channels-last, as written by most converters
        images = array.transpose(0, 3, 1, 2)
    else:
        raise DatasetFormatError(
            f"IDX image file {path} must have 3 or 4 dimensions, got {array.ndim}", offset=IDX_NDIM_OFFSET
        )
    if np.issubdtype(images.dtype, np.integer):
        return images.astype(np.float32) / 255.0
    bad = np.flatnonzero(~((array >= 0.0) & (array <= 1.0)))
    if bad.size:
        raise DatasetFormatError(
            f"Floating-point IDX pixel {array.reshape(-1)[bad[0]]} in {path} is outside [0, 1]",
            offset=_idx_header_size(array) + int(bad[0]) * array.dtype.itemsize,
        )
    return images.astype(np.float32)


def _idx_labels(path: Path, count: int, images_path: Path, num_classes: Optional[int]) -> np.ndarray:
    raw = read_idx(path)
    labels = raw.astype(np.int64).reshape(-1)
    if len(labels) != count:
        raise DatasetFormatError(f"{path} holds {len(labels)} labels for {count} images in {images_path}", offset=None)
    upper = np.iinfo(np.int64).max if num_classes is None else num_classes
    bad = np.flatnonzero((labels < 0) | (labels >= upper))
    if bad.size:
        valid = "non-negative" if num_classes is None else f"in [0, {num_classes})"
        raise DatasetFormatError(
            f"Label {labels[bad[0]]} in {path} is not {valid}",
            offset=_idx_header_size(raw) + int(bad[0]) * raw.dtype.itemsize,
        )
    return labels


def _idx_split(images_path: Optional[Path], labels_path: Optional[Path], num_classes: Optional[int] = None) -> Split:
    if images_path is None:
        return []
    images = _idx_images(read_idx(images_path), images_path)
    if labels_path is None:
        logger.warning("No labels file next to %s; every sample gets label 0", images_path)
        labels = np.zeros(len(images), dtype=np.int64)
    else:
        labels = _idx_labels(labels_path, len(images), images_path, num_classes)
    return _to_samples(images, labels)


def _find(root: Path, prefix: str, kind: str) -> Optional[Path]:
    matches = sorted(p for p in root.iterdir() if p.is_file() and p.name.startswith(prefix) and kind in p.name)
    return matches[0] if matches else None


def load_idx(path: PathLike, num_classes: Optional[int] = None) -> Tuple[Split, Split]:
    """
    Load IDX data from a directory (``train-images*``/``train-labels*`` and
    ``t10k-images*``/``t10k-labels*``) or from a single images file.

    A single file goes to the test split when its name starts with ``t10k`` or
    contains ``test``; its labels come from the sibling file with ``labels``
    in place of ``images`` when present.
    """
    root = Path(path)
    if root.is_file():
        sibling = root.with_name(root.name.replace("images", "labels"))
        labels = sibling if sibling != root and sibling.is_file() else None
        split = _idx_split(root, labels, num_classes)
        is_test = root.name.startswith("t10k") or "test" in root.name
        return ([], split) if is_test else (split, [])
    if not root.is_dir():
        raise DatasetError(f"IDX path does not exist: {root}")
    train = _idx_split(_find(root, "train", "images"), _find(root, "train", "labels"), num_classes)
    test = _idx_split(_find(root, "t10k", "images"), _find(root, "t10k", "labels"), num_classes)
    return train, test


# ---------------------------------------------------------------------------
# raw-tensor-dir
# ---------------------------------------------------------------------------

def encode_raw_tensor(sample: LabeledSample) -> bytes:
    """Serialise a sample in the ``.peasimg`` format."""
    c, h, w = sample.image.shape
    header = RAW_HEADER.pack(RAW_MAGIC, c, h, w, int(sample.label))
    return header + np.ascontiguousarray(sample.image, dtype="<f4").tobytes()


def decode_raw_tensor(
    data: bytes, source: str = "<bytes>", sample_id: int = -1, num_classes: Optional[int] = None
) -> LabeledSample:
    """
    Parse ``.peasimg`` bytes.

    Raises:
        DatasetFormatError: On bad magic, truncation, trailing bytes, pixels outside [0, 1]
            or a label outside [0, num_classes).
    """
    if len(data) < RAW_HEADER.size:
        raise DatasetFormatError(f"Raw tensor header truncated in {source}", offset=len(data))
    magic, c, h, w, label = RAW_HEADER.unpack_from(data)
    if magic != RAW_MAGIC:
        raise DatasetFormatError(f"Bad raw tensor magic {magic!r} in {source}", offset=0)
    if num_classes is not None and label >= num_classes:
        raise DatasetFormatError(
            f"Label {label} in {source} is not in [0, {num_classes})", offset=RAW_LABEL_OFFSET
        )
    expected = RAW_HEADER.size + 4 * c * h * w
    if len(data) != expected:
        raise DatasetFormatError(
            f"Raw tensor payload in {source} has {len(data)} bytes, expected {expected}",
            offset=min(len(data), expected),
        )
    pixels = np.frombuffer(data, dtype="<f4", offset=RAW_HEADER.size).astype(np.float32).reshape(c, h, w)
    bad = np.flatnonzero(~((pixels >= 0.0) & (pixels <= 1.0)))
    if bad.size:
        raise DatasetFormatError(
            f"Pixel value {pixels.reshape(-1)[bad[0]]} outside [0, 1] in {source}",
            offset=RAW_HEADER.size + 4 * int(bad[0]),
        )
    return LabeledSample(image=pixels, label=int(label), sample_id=sample_id)


def read_raw_tensor(path: PathLike, sample_id: int = -1, num_classes: Optional[int] = None) -> LabeledSample:
    return decode_raw_tensor(_read(Path(path)), str(path), sample_id, num_classes)


def write_raw_tensor(path: PathLike, sample: LabeledSample) -> None:
    """
    Raises:
        DatasetError: If the file cannot be written.
    """
    try:
        write_bytes(path, encode_raw_tensor(sample))
    except PeasError as e:
        raise DatasetError(f"Cannot write raw tensor {path}", cause=e) from e


def _raw_split(directory: Path, num_classes: Optional[int] = None) -> Split:
    files = sorted(directory.glob(f"*{RAW_SUFFIX}"))
    samples = [read_raw_tensor(f, sample_id=i, num_classes=num_classes) for i, f in enumerate(files)]
    shapes = {s.image.shape for s in samples}
    if len(shapes) > 1:
        raise DatasetFormatError(f"Inconsistent image shapes in {directory}: {sorted(shapes)}", offset=None)
    return samples


def load_raw_tensor_dir(path: PathLike, num_classes: Optional[int] = None) -> Tuple[Split, Split]:
    """
    Load a raw-tensor directory: ``train/`` and ``test/`` subdirectories, or
    bare files at the root (all treated as training data). An empty directory
    yields two empty splits.
    """
    root = Path(path)
    if not root.is_dir():
        raise DatasetError(f"raw-tensor-dir path is not a directory: {root}")
    if (root / "train").is_dir() or (root / "test").is_dir():
        train = _raw_split(root / "train", num_classes) if (root / "train").is_dir() else []
        test = _raw_split(root / "test", num_classes) if (root / "test").is_dir() else []
        return train, test
    return _raw_split(root, num_classes), []


def write_raw_tensor_dir(path: PathLike, train: Sequence[LabeledSample], test: Sequence[LabeledSample]) -> Path:
    """
    Write both splits as ``<path>/train/NNNNNN.peasimg`` and ``<path>/test/NNNNNN.peasimg``.

    Returns:
        The dataset root directory.
    """
    root = Path(path)
    for split_name, samples in (("train", train), ("test", test)):
        (root / split_name).mkdir(parents=True, exist_ok=True)
        for i, sample in enumerate(samples):
            write_raw_tensor(root / split_name / f"{i:06d}{RAW_SUFFIX}", sample)
    return root


LOADERS = {
    "cifar10-binary": load_cifar10_binary,
    "idx": load_idx,
    "raw-tensor-dir": load_raw_tensor_dir,
}


def load_dataset(path: PathLike, fmt: str, num_classes: Optional[int] = None) -> Tuple[Split, Split]:
    """
    Load a dataset from disk.

    Args:
        path: File or directory holding the data.
        fmt: One of "cifar10-binary", "idx", "raw-tensor-dir".
        num_classes: Class count K; when given, every label must lie in [0, K).

    Returns:
        (train, test) lists of LabeledSample with pixels in [0, 1].

    Raises:
        DatasetError: If the format is unknown or the path is missing.
        DatasetFormatError: If a file is malformed (the message names the byte offset).
    """
    if fmt not in LOADERS:
        valid = [f for f in SUPPORTED_FORMATS if f in LOADERS]
        raise DatasetError(f"Unknown dataset format '{fmt}'. Valid formats: {', '.join(valid)}")
    if not Path(path).exists():
        raise DatasetError(f"Dataset path does not exist: {path}")
    train, test = LOADERS[fmt](path, num_classes)
    logger.info("Loaded %s dataset from %s: %d train / %d test samples", fmt, path, len(train), len(test))
    return train, test
