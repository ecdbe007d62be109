"""MNIST IDX parsing, normalization, one-hot targets and seeded minibatches."""

import gzip
import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .rng import permutation

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801
NUM_CLASSES = 10
IMAGE_SIDE = 28

TRAIN_IMAGES = "train-images-idx3-ubyte"
TRAIN_LABELS = "train-labels-idx1-ubyte"
TEST_IMAGES = "t10k-images-idx3-ubyte"
TEST_LABELS = "t10k-labels-idx1-ubyte"


class FormatError(ValueError):
    """Bytes are not a well-formed IDX file."""


@dataclass(frozen=True)
class RawImages:
    count: int
    rows: int
    cols: int
    pixels: np.ndarray  # uint8, shape (count * rows * cols,)

    def __eq__(self, other):
        if not isinstance(other, RawImages):
            return NotImplemented
        return (self.count, self.rows, self.cols) == (other.count, other.rows, other.cols) and (
            np.array_equal(self.pixels, other.pixels)
        )


@dataclass(frozen=True)
class RawLabels:
    count: int
    labels: np.ndarray  # uint8, shape (count,)

    def __eq__(self, other):
        if not isinstance(other, RawLabels):
            return NotImplemented
        return self.count == other.count and np.array_equal(self.labels, other.labels)


@dataclass(frozen=True)
class LabeledDataset:
    """``inputs`` is n x 784 in [0, 1]; ``targets`` is n x 10 one-hot."""

    inputs: np.ndarray
    targets: np.ndarray

    def __post_init__(self):
        if self.inputs.ndim != 2 or self.targets.ndim != 2:
            raise ValueError("inputs and targets must be 2-D")
        if len(self.inputs) != len(self.targets):
            raise ValueError(
                f"{len(self.inputs)} inputs but {len(self.targets)} targets"
            )

    @property
    def n(self) -> int:
        return len(self.inputs)

    @property
    def labels(self) -> np.ndarray:
        return np.argmax(self.targets, axis=1)

    def subset(self, indices) -> "LabeledDataset":
        indices = np.asarray(indices, dtype=np.intp)
        return LabeledDataset(self.inputs[indices], self.targets[indices])


@dataclass(frozen=True)
class Minibatch:
    inputs: np.ndarray
    targets: np.ndarray
    indices: tuple[int, ...]

    @property
    def m(self) -> int:
        return len(self.indices)


def _maybe_gunzip(data: bytes) -> bytes:
    if data[:2] == b"\x1f\x8b":
        return gzip.decompress(data)
    return data


def _header(data: bytes, expected_magic: int, ndims: int) -> tuple[int, ...]:
    size = 4 * (1 + ndims)
    if len(data) < size:
        raise FormatError(f"header needs {size} bytes, got {len(data)}")
    magic, *dims = struct.unpack(f">{1 + ndims}I", data[:size])
    if magic != expected_magic:
        raise FormatError(
            f"bad magic 0x{magic:08X}, expected 0x{expected_magic:08X}"
        )
    return tuple(dims)


def _payload(data: bytes, offset: int, expected: int) -> np.ndarray:
    actual = len(data) - offset
    if actual != expected:
        raise FormatError(f"payload length mismatch: expected {expected} bytes, got {actual}")
    return np.frombuffer(data, dtype=np.uint8, offset=offset).copy()


def parse_idx_images(data: bytes) -> RawImages:
    data = _maybe_gunzip(data)
    count, rows, cols = _header(data, IMAGES_MAGIC, 3)
    pixels = _payload(data, 16, count * rows * cols)
    return RawImages(count, rows, cols, pixels)


def parse_idx_labels(data: bytes) -> RawLabels:
    data = _maybe_gunzip(data)
    (count,) = _header(data, LABELS_MAGIC, 1)
    labels = _payload(data, 8, count)
    bad = np.flatnonzero(labels > 9)
    if bad.size:
        off = int(bad[0])
        raise ValueError(
            f"label {labels[off]} out of range 0..9 at payload offset {off} (byte {8 + off})"
        )
    return RawLabels(count, labels)


def serialize_idx_images(raw: RawImages) -> bytes:
    return struct.pack(">4I", IMAGES_MAGIC, raw.count, raw.rows, raw.cols) + raw.pixels.tobytes()


def serialize_idx_labels(raw: RawLabels) -> bytes:
    return struct.pack(">2I", LABELS_MAGIC, raw.count) + raw.labels.tobytes()


def normalize(raw: RawImages) -> np.ndarray:
    """Flatten each image and scale pixels to [0, 1] by dividing by 255."""
    if raw.rows * raw.cols != IMAGE_SIDE * IMAGE_SIDE:
        raise ValueError(
            f"expected {IMAGE_SIDE}x{IMAGE_SIDE} images, got {raw.rows}x{raw.cols}"
        )
    return raw.pixels.reshape(raw.count, raw.rows * raw.cols).astype(np.float64) / 255.0


def one_hot(label: int) -> np.ndarray:
    if not 0 <= label < NUM_CLASSES:
        raise ValueError(f"label {label} out of range 0..{NUM_CLASSES - 1}")
    y = np.zeros(NUM_CLASSES)
    y[label] = 1.0
    return y


def one_hot_all(labels: np.ndarray) -> np.ndarray:
    labels = np.asarray(labels)
    if labels.size and (labels.min() < 0 or labels.max() >= NUM_CLASSES):
        raise ValueError(f"labels must lie in 0..{NUM_CLASSES - 1}")
    return np.eye(NUM_CLASSES)[labels]


def make_dataset(images: RawImages, labels: RawLabels) -> LabeledDataset:
    if images.count != labels.count:
        raise ValueError(f"{images.count} images but {labels.count} labels")
    return LabeledDataset(normalize(images), one_hot_all(labels.labels))


def load_pair(images_path, labels_path) -> LabeledDataset:
    images = parse_idx_images(Path(images_path).read_bytes())
    labels = parse_idx_labels(Path(labels_path).read_bytes())
    return make_dataset(images, labels)


def find_file(data_dir, name: str) -> Path:
    """Locate ``name`` in ``data_dir``, accepting a ``.gz`` variant or the dotted
    ``train-images.idx3-ubyte`` spelling some mirrors use."""
    data_dir = Path(data_dir)
    dotted = name.replace("-idx", ".idx")
    for candidate in (name, name + ".gz", dotted, dotted + ".gz"):
        path = data_dir / candidate
        if path.is_file():
            return path
    raise FileNotFoundError(f"{name} not found in {data_dir}")


def mnist_paths(data_dir) -> dict[str, Path]:
    return {
        name: find_file(data_dir, name)
        for name in (TRAIN_IMAGES, TRAIN_LABELS, TEST_IMAGES, TEST_LABELS)
    }


def load_mnist(data_dir) -> tuple[LabeledDataset, LabeledDataset]:
    paths = mnist_paths(data_dir)
    train = load_pair(paths[TRAIN_IMAGES], paths[TRAIN_LABELS])
    test = load_pair(paths[TEST_IMAGES], paths[TEST_LABELS])
    return train, test


def minibatches(ds: LabeledDataset, m: int, seed: int) -> list[Minibatch]:
    """Shuffle sample indices with seeded Fisher-Yates and cut them into
    consecutive batches of ``m``; the last batch keeps the remainder."""
    if not 1 <= m <= ds.n:
        raise ValueError(f"batch size {m} outside 1..{ds.n}")
    order = permutation(ds.n, seed)
    batches = []
    for start in range(0, ds.n, m):
        idx = order[start:start + m]
        sel = np.asarray(idx, dtype=np.intp)
        batches.append(Minibatch(ds.inputs[sel], ds.targets[sel], tuple(idx)))
    assert len(batches) == math.ceil(ds.n / m)
    return batches
