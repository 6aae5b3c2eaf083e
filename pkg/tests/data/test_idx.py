import gzip
import os
import struct
import tempfile

import numpy as np
import pytest

from densemem import data
from densemem.errors import IDXFormatError, ShapeMismatchError


def idx_images(pixels: np.ndarray, rows: int = 28, cols: int = 28) -> bytes:
    return struct.pack(">IIII", data.IMAGES_MAGIC, len(pixels), rows, cols) + pixels.astype(np.uint8).tobytes()


def idx_labels(labels) -> bytes:
    return struct.pack(">II", data.LABELS_MAGIC, len(labels)) + bytes(labels)


pixels = np.random.default_rng(0).integers(0, 256, size=(3, 784))


def test_that_images_are_parsed_into_rows():
    images = data.parse_idx_images(idx_images(pixels))
    assert images.shape == (3, 784) and images.dtype == np.uint8
    assert np.array_equal(images, pixels)


def test_that_gzipped_containers_are_accepted():
    assert np.array_equal(data.parse_idx_images(gzip.compress(idx_images(pixels))), pixels)
    assert np.array_equal(data.parse_idx_labels(gzip.compress(idx_labels([1, 2, 3]))), [1, 2, 3])


def test_that_malformed_image_containers_name_the_offset():

    # A label file fed to the image parser.
    with pytest.raises(IDXFormatError, match="labels magic in image parser"):
        data.parse_idx_images(idx_labels([1, 2]))

    # Empty input is truncated at offset 0.
    with pytest.raises(IDXFormatError) as e:
        data.parse_idx_images(b"")
    assert e.value.offset == 0

    # Missing pixels are reported at the end of the data.
    truncated = idx_images(pixels)[:-10]
    with pytest.raises(IDXFormatError) as e:
        data.parse_idx_images(truncated)
    assert e.value.offset == len(truncated)

    # Extra bytes are reported where they begin.
    with pytest.raises(IDXFormatError) as e:
        data.parse_idx_images(idx_images(pixels) + b"\x00")
    assert e.value.offset == 16 + 3 * 784

    # Images of the wrong size.
    with pytest.raises(IDXFormatError):
        data.parse_idx_images(idx_images(np.zeros((2, 16)), rows=4, cols=4))


def test_that_labels_are_range_checked():
    assert np.array_equal(data.parse_idx_labels(idx_labels([0, 9, 5])), [0, 9, 5])

    # Label byte 10 is out of range, at its own offset.
    with pytest.raises(IDXFormatError) as e:
        data.parse_idx_labels(idx_labels([0, 10]))
    assert e.value.offset == 9

    # An image file fed to the label parser.
    with pytest.raises(IDXFormatError, match="images magic in label parser"):
        data.parse_idx_labels(idx_images(pixels))


def test_that_pixels_map_onto_the_unit_interval_and_back():

    # The end points and an interior value.
    assert np.allclose(data.map_pixels(np.array([0, 255, 51])), [-1.0, 1.0, -0.6])

    # Every byte value survives the round trip.
    raw = np.arange(256, dtype=np.uint8)
    assert np.array_equal(data.unmap_pixels(data.map_pixels(raw)), raw)


def test_that_files_load_into_a_labeled_image_set():
    with tempfile.TemporaryDirectory() as path:
        images_path = os.path.join(path, "images.idx")
        labels_path = os.path.join(path, "labels.idx.gz")
        with open(images_path, "wb") as f:
            f.write(idx_images(pixels))
        with open(labels_path, "wb") as f:
            f.write(gzip.compress(idx_labels([4, 0, 7])))
        dataset = data.load_labeled_images(images_path, labels_path)

        # Mapped pixels and integer labels.
        assert len(dataset) == 3 and dataset.num_visible == 784
        assert dataset.images.min() >= -1 and dataset.images.max() <= 1
        assert list(dataset.labels) == [4, 0, 7]

        # Mismatched counts.
        with open(labels_path, "wb") as f:
            f.write(idx_labels([4, 0]))
        with pytest.raises(ShapeMismatchError):
            data.load_labeled_images(images_path, labels_path)


def test_the_xor_truth_table():
    table = data.xor_dataset()
    assert [tuple(row) for row in table] == [(-1, -1, -1), (-1, 1, 1), (1, -1, 1), (1, 1, -1)]
