import gzip
import struct

import numpy as np
import tensorflow as tf

from dataclasses import dataclass
from typing import Iterator, Optional, Tuple

from .errors import IDXFormatError, ShapeMismatchError
from .rng import spawn_generator


IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801

_SPLIT_STREAM = 1
_MINIBATCH_STREAM = 2


@dataclass(frozen=True)
class LabeledImageSet:
    """
    Images with pixel values in [-1, 1], one per row, and their class labels.
    """
    images: np.ndarray
    labels: np.ndarray
    num_classes: int = 10

    def __post_init__(self):
        if self.images.ndim != 2:
            raise ShapeMismatchError(f"images must be count x N, got shape {self.images.shape}")
        if self.images.shape[0] != self.labels.shape[0]:
            raise ShapeMismatchError(
                f"{self.images.shape[0]} images but {self.labels.shape[0]} labels")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.num_classes):
            raise ValueError(f"labels must lie in [0, {self.num_classes})")

    def __len__(self):
        return self.labels.shape[0]

    @property
    def num_visible(self) -> int:
        return self.images.shape[1]

    def subset(self, indices: np.ndarray) -> "LabeledImageSet":
        return LabeledImageSet(self.images[indices], self.labels[indices], self.num_classes)


@dataclass(frozen=True)
class SplitSpec:
    train: int
    validation: int
    seed: int = 0

    def __post_init__(self):
        if self.train < 0 or self.validation < 0:
            raise ValueError(f"split counts must be non-negative, got {self.train}, {self.validation}")


def _maybe_decompress(data: bytes) -> bytes:
    if data[:2] == b"\x1f\x8b":
        return gzip.decompress(data)
    return data


def _read_magic(data: bytes, expected: int, parser: str) -> None:
    if len(data) < 4:
        raise IDXFormatError("truncated magic number", offset=len(data))
    (magic,) = struct.unpack(">I", data[:4])
    if magic == expected:
        return
    if magic == LABELS_MAGIC:
        raise IDXFormatError(f"labels magic in {parser} parser", offset=0)
    if magic == IMAGES_MAGIC:
        raise IDXFormatError(f"images magic in {parser} parser", offset=0)
    raise IDXFormatError(f"bad magic number 0x{magic:08x}", offset=0)


def parse_idx_images(data: bytes, *, image_shape: Optional[Tuple[int, int]] = (28, 28)) -> np.ndarray:
    """
    Parses an IDX3 image container (big-endian header: magic 0x00000803,
    count, rows, cols; then count * rows * cols unsigned bytes) into a
    count x (rows * cols) uint8 matrix. Gzipped input is accepted.
    """
    data = _maybe_decompress(bytes(data))
    _read_magic(data, IMAGES_MAGIC, "image")
    if len(data) < 16:
        raise IDXFormatError("truncated image header", offset=len(data))
    count, rows, cols = struct.unpack(">III", data[4:16])
    if image_shape is not None and (rows, cols) != tuple(image_shape):
        raise IDXFormatError(f"expected {image_shape[0]}x{image_shape[1]} images, found {rows}x{cols}", offset=8)
    expected = count * rows * cols
    payload = len(data) - 16
    if payload < expected:
        raise IDXFormatError(f"truncated pixel data: {count} images need {expected} bytes", offset=len(data))
    if payload > expected:
        raise IDXFormatError(f"{payload - expected} trailing bytes after {count} images", offset=16 + expected)
    return np.frombuffer(data, dtype=np.uint8, offset=16).reshape(count, rows * cols)


def parse_idx_labels(data: bytes, *, num_classes: int = 10) -> np.ndarray:
    """
    Parses an IDX1 label container (magic 0x00000801, count, then count
    unsigned bytes). Every label must lie in [0, num_classes).
    """
    data = _maybe_decompress(bytes(data))
    _read_magic(data, LABELS_MAGIC, "label")
    if len(data) < 8:
        raise IDXFormatError("truncated label header", offset=len(data))
    (count,) = struct.unpack(">I", data[4:8])
    payload = len(data) - 8
    if payload < count:
        raise IDXFormatError(f"truncated label data: {count} labels expected", offset=len(data))
    if payload > count:
        raise IDXFormatError(f"{payload - count} trailing bytes after {count} labels", offset=8 + count)
    labels = np.frombuffer(data, dtype=np.uint8, offset=8)
    bad = np.flatnonzero(labels >= num_classes)
    if bad.size:
        raise IDXFormatError(f"label {labels[bad[0]]} outside [0, {num_classes})", offset=8 + int(bad[0]))
    return labels


def _read_bytes(path: str) -> bytes:
    with tf.io.gfile.GFile(path, "rb") as f:
        return f.read()


def load_idx_images(path: str, **kwargs) -> np.ndarray:
    return parse_idx_images(_read_bytes(path), **kwargs)


def load_idx_labels(path: str, **kwargs) -> np.ndarray:
    return parse_idx_labels(_read_bytes(path), **kwargs)


def map_pixels(raw: np.ndarray) -> np.ndarray:
    """
    Maps pixel intensities 0..255 linearly onto [-1, 1].
    """
    return np.asarray(raw, dtype=np.float64) * (2.0 / 255.0) - 1.0


def unmap_pixels(values: np.ndarray) -> np.ndarray:
    """
    Inverts `map_pixels`, rounding back to bytes.
    """
    return np.round(np.clip((np.asarray(values) + 1.0) * 127.5, 0, 255)).astype(np.uint8)


def load_labeled_images(images_path: str, labels_path: str, *, num_classes: int = 10) -> LabeledImageSet:
    """
    Loads a pair of IDX files into a LabeledImageSet with mapped pixels.
    """
    raw = load_idx_images(images_path)
    labels = load_idx_labels(labels_path, num_classes=num_classes)
    if raw.shape[0] != labels.shape[0]:
        raise ShapeMismatchError(f"{images_path} holds {raw.shape[0]} images, {labels_path} {labels.shape[0]} labels")
    return LabeledImageSet(map_pixels(raw), labels.astype(np.int64), num_classes)


def one_hot_targets(labels: np.ndarray, num_classes: int) -> np.ndarray:
    """
    Targets t_alpha = +1 for the correct class and -1 for the others.
    """
    targets = -np.ones((len(labels), num_classes), dtype=np.float64)
    targets[np.arange(len(labels)), labels] = 1.0
    return targets


def split(dataset: LabeledImageSet, spec: SplitSpec) -> Tuple[LabeledImageSet, LabeledImageSet]:
    """
    Splits a dataset into disjoint train and validation sets of the
    requested sizes. Each class is split in proportion to its size.
    """
    if spec.train + spec.validation != len(dataset):
        raise ValueError(
            f"split sizes {spec.train} + {spec.validation} do not add up to {len(dataset)} examples")
    generator = spawn_generator(spec.seed, _SPLIT_STREAM)

    # Share the validation examples out among the classes by largest remainder.
    counts = np.bincount(dataset.labels, minlength=dataset.num_classes)
    exact = counts * (spec.validation / max(len(dataset), 1))
    quota = np.floor(exact).astype(np.int64)
    remainder = spec.validation - quota.sum()
    quota[np.argsort(-(exact - quota), kind="stable")[:remainder]] += 1

    # Draw each class's validation examples at random.
    validation = []
    for c in range(dataset.num_classes):
        members = np.flatnonzero(dataset.labels == c)
        validation.append(generator.permutation(members)[:quota[c]])
    validation = np.sort(np.concatenate(validation)).astype(np.int64)
    train = np.setdiff1d(np.arange(len(dataset)), validation, assume_unique=True)
    return dataset.subset(train), dataset.subset(validation)


def minibatches(
    dataset: LabeledImageSet,
    *,
    per_class: int = 100,
    seed: int = 0,
    epoch: int = 0,
) -> Iterator[Tuple[np.ndarray, np.ndarray]]:
    """
    Yields (images, labels) minibatches holding exactly `per_class`
    examples of every class, reshuffled for each (seed, epoch). Emission
    stops when any class runs out; the ragged remainder is dropped.
    """
    if per_class < 1:
        raise ValueError(f"per_class must be >= 1, got {per_class}")
    generator = spawn_generator(seed, _MINIBATCH_STREAM, epoch)
    pools = [
        generator.permutation(np.flatnonzero(dataset.labels == c))
        for c in range(dataset.num_classes)]
    num_batches = min(len(pool) for pool in pools) // per_class
    for b in range(num_batches):
        indices = np.concatenate([pool[b * per_class:(b + 1) * per_class] for pool in pools])
        indices = generator.permutation(indices)
        yield dataset.images[indices], dataset.labels[indices]


def xor_dataset() -> np.ndarray:
    """
    The XOR truth table as four (x, y, z) triplets, z being the label.
    """
    return np.array([
        [-1, -1, -1],
        [-1, 1, 1],
        [1, -1, 1],
        [1, 1, -1],
    ], dtype=np.int8)
