"""Reading and writing the MNIST IDX files.

Download the four files from the MNIST distribution and point SPIKESIM_DATA
(or --data-dir) at the directory holding them. Nothing is downloaded here.
"""
import gzip
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Tuple, Union

import numpy as np

from .errors import CountTooLargeError, DataError, DimensionMismatchError
from .errors import LabelOutOfRangeError, TruncatedError, WrongMagicError
from .util import ensure_path

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801
IMAGE_SIZE = 28
NUM_CLASSES = 10

MNIST_FILES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}


@dataclass(frozen=True)
class Dataset:
    """Images in [0, 1] with shape [N, rows, cols] and integer labels in
    0..9 with shape [N]."""

    images: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        if len(self.images) != len(self.labels):
            err = "Dataset has {} images but {} labels".format(
                len(self.images), len(self.labels)
            )
            raise DataError(err)
        if self.images.size and (self.images.min() < 0 or self.images.max() > 1):
            raise DataError("Dataset pixels must lie in [0, 1]")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= NUM_CLASSES):
            raise LabelOutOfRangeError("Dataset labels must lie in 0..9")

    def __len__(self) -> int:
        return len(self.labels)


def _read_bytes(path: Path) -> bytes:
    if path.suffix == ".gz":
        try:
            with gzip.open(path, "rb") as f:
                return f.read()
        except (EOFError, gzip.BadGzipFile) as e:
            raise TruncatedError("Cannot decompress {}: {}".format(path, e))
    return path.read_bytes()


def _read_header(data: bytes, path: Path, magic: int, n_dims: int) -> Tuple[int, ...]:
    header_size = 4 * (1 + n_dims)
    if len(data) < header_size:
        err = "IDX header of {} is truncated ({} bytes)".format(path, len(data))
        raise TruncatedError(err)
    found, *dims = struct.unpack(">{}I".format(1 + n_dims), data[:header_size])
    if found != magic:
        err = "Magic number mismatch in {}: expected 0x{:08x}, found 0x{:08x}"
        raise WrongMagicError(err.format(path, magic, found))
    return tuple(dims)


def _read_payload(data: bytes, path: Path, offset: int, count: int) -> np.ndarray:
    available = len(data) - offset
    if available < count:
        err = "IDX payload of {} is truncated: header promises {} bytes, found {}"
        raise TruncatedError(err.format(path, count, available))
    return np.frombuffer(data, dtype=np.uint8, count=count, offset=offset)


def load_idx_images(path: Union[str, Path], strict: bool = True) -> np.ndarray:
    """Load an IDX3 image file.

    path (Union[str, Path]): The file to read (optionally gzipped).
    strict (bool): Require 28x28 images.
    RETURNS (np.ndarray): Float64 array [N, rows, cols] with byte / 255.
    """
    path = ensure_path(path)
    data = _read_bytes(path)
    n, rows, cols = _read_header(data, path, IMAGES_MAGIC, 3)
    if strict and (rows, cols) != (IMAGE_SIZE, IMAGE_SIZE):
        err = "Expected {}x{} images in {}, found {}x{}".format(
            IMAGE_SIZE, IMAGE_SIZE, path, rows, cols
        )
        raise DimensionMismatchError(err)
    payload = _read_payload(data, path, 16, n * rows * cols)
    return payload.reshape((n, rows, cols)).astype(np.float64) / 255.0


def load_idx_labels(path: Union[str, Path]) -> np.ndarray:
    """Load an IDX1 label file.

    path (Union[str, Path]): The file to read (optionally gzipped).
    RETURNS (np.ndarray): Int64 array [N] of labels in 0..9.
    """
    path = ensure_path(path)
    data = _read_bytes(path)
    (n,) = _read_header(data, path, LABELS_MAGIC, 1)
    labels = _read_payload(data, path, 8, n).astype(np.int64)
    if labels.size and labels.max() >= NUM_CLASSES:
        bad = int(labels.max())
        err = "Label {} in {} is outside 0..{}".format(bad, path, NUM_CLASSES - 1)
        raise LabelOutOfRangeError(err)
    return labels


def write_idx_images(path: Union[str, Path], images: np.ndarray) -> None:
    """Write images in [0, 1] to an IDX3 file. Values are rounded to the
    nearest byte, so images loaded from IDX round-trip exactly.

    path (Union[str, Path]): The file to write.
    images (np.ndarray): Array [N, rows, cols].
    """
    n, rows, cols = images.shape
    payload = np.rint(np.asarray(images) * 255.0).astype(np.uint8)
    header = struct.pack(">4I", IMAGES_MAGIC, n, rows, cols)
    ensure_path(path).write_bytes(header + payload.tobytes())


def write_idx_labels(path: Union[str, Path], labels: np.ndarray) -> None:
    """Write integer labels to an IDX1 file.

    path (Union[str, Path]): The file to write.
    labels (np.ndarray): Array [N] of labels.
    """
    payload = np.asarray(labels).astype(np.uint8)
    header = struct.pack(">2I", LABELS_MAGIC, len(payload))
    ensure_path(path).write_bytes(header + payload.tobytes())


def load_mnist(data_dir: Union[str, Path], split: str, strict: bool = True) -> Dataset:
    """Load the train or test split from a directory holding the standard
    MNIST file names, plain or gzipped.

    data_dir (Union[str, Path]): Directory with the IDX files.
    split (str): "train" or "test".
    strict (bool): Require 28x28 images.
    RETURNS (Dataset): The loaded dataset.
    """
    if split not in MNIST_FILES:
        raise ValueError("Unknown split: {}".format(split))
    data_dir = ensure_path(data_dir)
    paths = []
    for name in MNIST_FILES[split]:
        path = data_dir / name
        if not path.exists() and (data_dir / (name + ".gz")).exists():
            path = data_dir / (name + ".gz")
        if not path.exists():
            raise FileNotFoundError("MNIST file not found: {}".format(path))
        paths.append(path)
    images = load_idx_images(paths[0], strict=strict)
    labels = load_idx_labels(paths[1])
    return Dataset(images, labels)


def subset(ds: Dataset, count: int, seed: int) -> Dataset:
    """Draw a deterministic sample without replacement.

    ds (Dataset): The dataset to sample from.
    count (int): Number of samples, 0 < count <= len(ds).
    seed (int): Seed of the permutation.
    RETURNS (Dataset): The sampled dataset.
    """
    if count > len(ds):
        err = "Cannot draw {} samples from a dataset of {}".format(count, len(ds))
        raise CountTooLargeError(err)
    if count <= 0:
        raise CountTooLargeError("Subset size must be positive, got {}".format(count))
    rng = np.random.default_rng(seed)
    idx = rng.permutation(len(ds))[:count]
    return Dataset(ds.images[idx], ds.labels[idx])
