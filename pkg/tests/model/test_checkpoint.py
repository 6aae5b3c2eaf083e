import os
import struct
import tempfile

import numpy as np
import pytest

from densemem.energy import EnergyKind, EnergyModel
from densemem.errors import CheckpointFormatError
from densemem.model import ClassifierModel, Framing, export_weights_csv, load_checkpoint, save_checkpoint


weights = np.random.default_rng(0).uniform(-1, 1, size=(5, 7))
model = ClassifierModel(
    weights, num_visible=4, energy=EnergyModel(20, "poly"), beta=600.0 ** -20, framing="associative")


def saved_bytes():
    with tempfile.TemporaryDirectory() as path:
        save_checkpoint(model, os.path.join(path, "model.dam"), loss_power=30)
        with open(os.path.join(path, "model.dam"), "rb") as f:
            return f.read()


def load_bytes(data):
    with tempfile.TemporaryDirectory() as path:
        with open(os.path.join(path, "model.dam"), "wb") as f:
            f.write(data)
        return load_checkpoint(os.path.join(path, "model.dam"))


def test_the_checkpoint_layout():
    data = saved_bytes()

    # Magic, then the little-endian header fields.
    assert data[:4] == b"DAM1"
    version, kind, n, K, N, num_classes = struct.unpack_from("<6I", data, 4)
    assert (version, kind, n, K, N, num_classes) == (1, 0, 20, 5, 4, 3)
    (beta,) = struct.unpack_from("<d", data, 28)
    assert beta == model.beta

    # Row-major float64 weights close the file.
    assert np.array_equal(np.frombuffer(data[-8 * 35:], dtype="<f8").reshape(5, 7), weights)


def test_that_a_checkpoint_restores_the_model():
    restored, loss_power = load_bytes(saved_bytes())
    assert loss_power == 30
    assert restored.energy == EnergyModel(20, EnergyKind.POLYNOMIAL)
    assert restored.framing is Framing.ASSOCIATIVE
    assert restored.beta == model.beta
    assert np.array_equal(restored.memories.numpy(), weights)


def test_that_malformed_checkpoints_are_rejected():
    data = saved_bytes()

    # Wrong magic, short header, missing and extra weights.
    for broken in (b"DAM2" + data[4:], data[:20], data[:-8], data + b"\x00" * 8):
        with pytest.raises(CheckpointFormatError):
            load_bytes(broken)

    # Weights outside [-1, 1].
    outside = bytearray(data)
    outside[-8:] = struct.pack("<d", 1.5)
    with pytest.raises(CheckpointFormatError):
        load_bytes(bytes(outside))


def test_that_weights_export_as_csv():
    with tempfile.TemporaryDirectory() as path:
        export_weights_csv(model, os.path.join(path, "weights.csv"))
        with open(os.path.join(path, "weights.csv")) as f:
            lines = f.read().splitlines()

    # A header, then one row per memory.
    assert lines[0].split(",") == ["memory", "v0", "v1", "v2", "v3", "c0", "c1", "c2"]
    assert len(lines) == 6
    assert np.allclose([float(v) for v in lines[1].split(",")[1:]], weights[0])
