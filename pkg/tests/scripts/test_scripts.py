import glob
import os
import struct
import tempfile

import numpy as np
import tensorflow as tf
import pytest

from densemem.scripts import analyze, capacity, evaluate, train, xor
from densemem.scripts import limit_threads


def single_run_dir(output_path, command):
    run_dirs = glob.glob(os.path.join(output_path, f"{command}-*"))
    assert len(run_dirs) == 1
    return run_dirs[0]


def write_idx(path, per_class=6, seed=0):
    """
    Writes 28x28 IDX images and labels: noisy copies of one prototype per digit.
    """
    generator = np.random.default_rng(seed)
    prototypes = generator.integers(0, 2, size=(10, 784)) * 255
    labels = np.repeat(np.arange(10), per_class)
    noise = generator.integers(-40, 41, size=(len(labels), 784))
    pixels = np.clip(prototypes[labels] + noise, 0, 255).astype(np.uint8)
    with open(path + "-images.idx", "wb") as f:
        f.write(struct.pack(">IIII", 0x803, len(labels), 28, 28) + pixels.tobytes())
    with open(path + "-labels.idx", "wb") as f:
        f.write(struct.pack(">II", 0x801, len(labels)) + labels.astype(np.uint8).tobytes())
    return path + "-images.idx", path + "-labels.idx"


@pytest.mark.parametrize("n,kind,status", [(3, "poly", 0), (2, "poly", 1), (2, "rect", 0)])
def test_xor(n, kind, status, capsys):
    with tempfile.TemporaryDirectory() as output_path:
        assert xor.main(["--n", str(n), "--kind", kind, "--output_path", output_path]) == status
        run_dir = single_run_dir(output_path, "xor")

        # A provenance record precedes the results.
        assert os.path.exists(os.path.join(run_dir, "provenance.jsonl"))
        assert os.path.exists(os.path.join(run_dir, "xor.csv"))

    # Undecidable rows are reported as such.
    out = capsys.readouterr().out
    assert ("Undecidable" in out) == (status == 1)


def test_capacity_theory(capsys):
    with tempfile.TemporaryDirectory() as output_path:
        assert capacity.main(["theory", "--N", "100", "--n", "2,3,4", "--output_path", output_path]) == 0
        with open(os.path.join(single_run_dir(output_path, "capacity"), "theory.csv")) as f:
            rows = [line.split(",") for line in f.read().splitlines()]

    # Perfect-recovery capacities of 11, 362 and 7238 memories.
    assert [int(row[2]) for row in rows[1:]] == [11, 362, 7238]


def test_that_capacity_histograms_are_reproducible():
    argv = ["hist", "--N", "40", "--K", "10", "--n", "3", "--trials", "30"]
    outputs = []
    for threads in ("1", "2"):
        with tempfile.TemporaryDirectory() as output_path:
            assert capacity.main(argv + ["--threads", threads, "--output_path", output_path]) == 0
            with open(os.path.join(single_run_dir(output_path, "capacity"), "hist_N40_K10_n3_poly.csv")) as f:
                outputs.append(f.read())

    # Byte-identical whatever the thread count.
    assert outputs[0] == outputs[1]


def test_that_bad_usage_exits_with_status_2():
    with tempfile.TemporaryDirectory() as output_path:

        # Unknown mode.
        with pytest.raises(SystemExit) as e:
            capacity.main(["nonsense", "--output_path", output_path])
        assert e.value.code == 2

        # A file that is not IDX.
        path = os.path.join(output_path, "garbage")
        with open(path, "wb") as f:
            f.write(b"not an idx file")
        assert evaluate.main(
            ["--checkpoint", path, "--images", path, "--labels", path, "--output_path", output_path]) == 2


def test_train_evaluate_and_analyze(capsys):
    with tempfile.TemporaryDirectory() as output_path:
        images, labels = write_idx(os.path.join(output_path, "train"))
        test_images, test_labels = write_idx(os.path.join(output_path, "test"), per_class=2, seed=1)
        common = ["--output_path", output_path]

        status = train.main([
            "--images", images, "--labels", labels,
            "--test_images", test_images, "--test_labels", test_labels,
            "--validation", "10", "--K", "8", "--epochs", "2", "--per_class", "2",
            "--T_initial", "30", "--T_final", "20", "--anneal_epochs", "1", "--max_test_error", "1.0",
        ] + common)
        assert status == 0
        run_dir = single_run_dir(output_path, "train")
        checkpoint = os.path.join(run_dir, "model.dam")
        for name in ("model.dam", "metrics.csv", "curve.csv", "curve.json", "provenance.jsonl"):
            assert os.path.exists(os.path.join(run_dir, name))

        # The error rate lies in [0, 1].
        capsys.readouterr()
        assert evaluate.main(["--checkpoint", checkpoint, "--images", test_images, "--labels", test_labels] + common) == 0
        assert 0 <= float(capsys.readouterr().out.strip()) <= 1

        # Both histograms conserve their totals.
        assert analyze.main([
            "--checkpoint", checkpoint, "--images", test_images, "--labels", test_labels,
            "--votes", "--contrib", "--weights", "--memories", "0,3", "--curve", os.path.join(run_dir, "metrics.csv"),
        ] + common) == 0
        analyze_dir = single_run_dir(output_path, "analyze")
        votes = np.loadtxt(os.path.join(analyze_dir, "votes.csv"), delimiter=",", skiprows=1)
        contributions = np.loadtxt(os.path.join(analyze_dir, "contributions.csv"), delimiter=",", skiprows=1)
        assert votes[:, 1].sum() == 8 and contributions[:, 1].sum() == 20
        assert os.path.exists(os.path.join(analyze_dir, "memories", "memory_3.pgm"))

        # One row per memory: its index, 784 visible and 10 recognition weights.
        weights = np.loadtxt(os.path.join(analyze_dir, "weights.csv"), delimiter=",", skiprows=1)
        assert weights.shape == (8, 1 + 784 + 10) and np.all(np.abs(weights[:, 1:]) <= 1)

        # An unreachable error target fails the run.
        status = train.main([
            "--images", images, "--labels", labels,
            "--test_images", test_images, "--test_labels", test_labels,
            "--validation", "10", "--K", "8", "--epochs", "1", "--per_class", "2", "--max_test_error", "-1",
        ] + common)
        assert status == 1


def test_that_the_thread_count_caps_tensorflow(monkeypatch):
    caps = []
    monkeypatch.setattr(tf.config.threading, "set_intra_op_parallelism_threads", lambda n: caps.append(("intra", n)))
    monkeypatch.setattr(tf.config.threading, "set_inter_op_parallelism_threads", lambda n: caps.append(("inter", n)))
    with tempfile.TemporaryDirectory() as output_path:
        assert xor.main(["--n", "3", "--threads", "3", "--output_path", output_path]) == 0
    assert caps == [("intra", 3), ("inter", 3)]


def test_that_a_started_runtime_keeps_its_thread_pools(monkeypatch):
    def refuse(n):
        raise RuntimeError("Intra op parallelism cannot be modified after initialization.")

    # A warning, not a failure.
    monkeypatch.setattr(tf.config.threading, "set_intra_op_parallelism_threads", refuse)
    limit_threads(2)
