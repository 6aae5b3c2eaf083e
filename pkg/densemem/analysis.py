"""
Diagnostics of what the memories of a trained classifier encode: how many
classes each memory votes for, and how many memories share the decision
on a typical image.
"""

import csv
import json
import math
import os

import numpy as np
import tensorflow as tf

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

from .data import LabeledImageSet
from .errors import ShapeMismatchError
from .model import ClassifierModel, EpochMetrics, METRICS_HEADER
from .config import analyze as cfg

_CHUNK = 250


@dataclass(frozen=True)
class VoteHistogram:
    """
    counts[k] is the number of memories with exactly k recognition
    weights above `cutoff`, k = 0 .. N_c.
    """
    counts: np.ndarray
    cutoff: float

    @property
    def total(self) -> int:
        return int(self.counts.sum())


@dataclass(frozen=True)
class ContributionHistogram:
    """
    counts[j] is the number of images on which exactly j memories
    contribute at least `band` of the largest contribution, j = 0 .. K.
    counts[0] is always zero.
    """
    counts: np.ndarray
    band: float

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def votes_per_memory(model: ClassifierModel, cutoff: float = cfg.defaults.cutoff) -> VoteHistogram:
    votes = np.sum(model.recognition.numpy() > cutoff, axis=1)
    return VoteHistogram(np.bincount(votes, minlength=model.num_classes + 1), cutoff)


def gap_terms(model: ClassifierModel, images, channels) -> np.ndarray:
    """
    Per image, the contribution of every memory to the gap of output
    unit `channels[A]`, M x K.
    """
    images = np.asarray(images, dtype=np.float64)
    channels = np.asarray(channels, dtype=np.int64)
    if images.shape[0] != channels.shape[0]:
        raise ShapeMismatchError(f"{images.shape[0]} images but {channels.shape[0]} channels")
    if not images.shape[0]:
        return np.zeros((0, model.num_memories))
    return np.concatenate([
        model.gap_terms(images[start:start + _CHUNK], channels[start:start + _CHUNK]).numpy()
        for start in range(0, images.shape[0], _CHUNK)])


def count_dominant(terms: np.ndarray, band: float = cfg.defaults.band) -> np.ndarray:
    """
    Per row, the number of entries within `band` of the row maximum,
    i.e. at least max - (1 - band) |max|. The maximizer always counts.
    """
    if not 0 < band <= 1:
        raise ValueError(f"band must lie in (0, 1], got {band}")
    terms = np.atleast_2d(terms)
    top = terms.max(axis=1, keepdims=True)
    return np.sum(terms >= top - (1.0 - band) * np.abs(top), axis=1)


def dominant_contributions(
    model: ClassifierModel,
    dataset: LabeledImageSet,
    band: float = cfg.defaults.band,
    *,
    channel: str = cfg.defaults.channel,
) -> ContributionHistogram:
    """
    Histogram over images of the number of memories whose contribution to
    the gap of the predicted (or true) class comes within `band` of the
    largest one.
    """
    if channel == "predicted":
        channels = model.predict(dataset.images) if len(dataset) else np.zeros(0, dtype=np.int64)
    elif channel == "true":
        channels = dataset.labels
    else:
        raise ValueError(f"channel must be 'predicted' or 'true', got {channel!r}")
    j = count_dominant(gap_terms(model, dataset.images, channels), band) if len(dataset) else np.zeros(0, np.int64)
    return ContributionHistogram(np.bincount(j, minlength=model.num_memories + 1), band)


def mean_votes(histogram: VoteHistogram) -> float:
    k = np.arange(histogram.counts.size)
    return float(np.sum(k * histogram.counts) / histogram.total)


def single_dominant_fraction(histogram: ContributionHistogram) -> float:
    return float(histogram.counts[1] / histogram.total)


def write_histogram_csv(counts: np.ndarray, path: str, header: Tuple[str, str] = ("k", "count")):
    with tf.io.gfile.GFile(path, "w") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for k, count in enumerate(counts):
            writer.writerow([k, int(count)])


def memory_to_graymap(weights: np.ndarray) -> np.ndarray:
    """
    Maps weights in [-1, 1] onto bytes, 0 -> 128 and +1 -> 255.
    """
    return np.floor(np.clip(127.5 * np.asarray(weights) + 127.5, 0, 255) + 0.5).astype(np.uint8)


def export_memory_images(
    model: ClassifierModel,
    indices: Sequence[int],
    path: str,
    *,
    image_shape: Tuple[int, int] = (28, 28),
):
    """
    Writes the visible part of each selected memory as `memory_<mu>.pgm`
    (binary graymap) into the directory `path`, and their recognition
    weights to `recognition.csv`.
    """
    rows, cols = image_shape
    if rows * cols != model.num_visible:
        raise ShapeMismatchError(f"{model.num_visible} visible units do not form a {rows}x{cols} image")
    for mu in indices:
        if not 0 <= mu < model.num_memories:
            raise ValueError(f"memory index {mu} outside [0, {model.num_memories})")

    tf.io.gfile.makedirs(path)
    visible = model.visible.numpy()
    recognition = model.recognition.numpy()
    for mu in indices:
        pixels = memory_to_graymap(visible[mu])
        with tf.io.gfile.GFile(os.path.join(path, f"memory_{mu}.pgm"), "wb") as f:
            f.write(f"P5\n{cols} {rows}\n255\n".encode("ascii") + pixels.tobytes())
    with tf.io.gfile.GFile(os.path.join(path, "recognition.csv"), "w") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["memory"] + [f"c{a}" for a in range(model.num_classes)])
        for mu in indices:
            writer.writerow([mu] + [repr(float(w)) for w in recognition[mu]])


def first_crossing(errors: Sequence[float], threshold: float) -> Optional[int]:
    """
    The 1-based epoch at which the error first falls below `threshold`.
    """
    for epoch, error in enumerate(errors, start=1):
        if not math.isnan(error) and error < threshold:
            return epoch
    return None


def read_metrics_csv(path: str) -> Sequence[EpochMetrics]:
    def value(text):
        return float(text) if text else math.nan
    with tf.io.gfile.GFile(path, "r") as f:
        reader = csv.DictReader(f)
        if tuple(reader.fieldnames or ()) != METRICS_HEADER:
            raise ValueError(f"{path}: expected header {','.join(METRICS_HEADER)}")
        return [
            EpochMetrics(
                epoch=int(row["epoch"]),
                train_err=value(row["train_err"]),
                val_err=value(row["val_err"]),
                test_err=value(row["test_err"]),
                lr=value(row["lr"]),
                T=value(row["T"]),
                loss=math.nan,
            )
            for row in reader]


def export_training_curve(
    metrics: Sequence[EpochMetrics],
    path: str,
    *,
    threshold: float = cfg.defaults.curve_threshold,
    column: str = "test_err",
) -> Optional[int]:
    """
    Writes `epoch,<column>` to `path` and a JSON summary of the first
    epoch below `threshold` next to it. Returns that epoch, or None.
    """
    errors = [getattr(m, column) for m in metrics]
    crossing = first_crossing(errors, threshold)
    if crossing is not None:
        crossing = metrics[crossing - 1].epoch
    with tf.io.gfile.GFile(path, "w") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["epoch", column])
        for m, error in zip(metrics, errors):
            writer.writerow([m.epoch, "" if math.isnan(error) else f"{error:.6f}"])
    summary = {"column": column, "threshold": threshold, "crossing_epoch": crossing}
    with tf.io.gfile.GFile(os.path.splitext(path)[0] + ".json", "w") as f:
        f.write(json.dumps(summary, sort_keys=True) + "\n")
    return crossing
