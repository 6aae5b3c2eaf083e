import os
import tempfile

import numpy as np
import pytest

from densemem import capacity
from densemem.capacity import TrialGrid, find_k_half, random_memories, run_grid, run_recovery_trials


def test_that_an_overloaded_quadratic_memory_recovers_almost_nothing():
    histogram = run_recovery_trials(100, 2000, 2, "poly", trials=200, seed=0)

    # Trial counts are conserved and nearly no trial reaches a pattern.
    assert histogram.total == 200 and histogram.nonconverged == 0
    assert histogram.perfect_fraction <= 0.05


def test_that_high_powers_recover_at_the_same_load():

    # Quartic energies recover a pattern or its mirror image from most starts.
    histogram = run_recovery_trials(100, 2000, 4, "poly", trials=200, seed=0)
    assert histogram.recovered_fraction == histogram.unsigned_perfect_fraction >= 0.8
    assert histogram.perfect_fraction >= 0.3
    assert run_recovery_trials(100, 2000, 4, "rect", trials=200, seed=0).recovered_fraction >= 0.8

    # Quintic energies recover from essentially every start.
    for kind in ("poly", "rect"):
        histogram = run_recovery_trials(100, 2000, 5, kind, trials=200, seed=0)
        assert histogram.perfect_fraction >= 0.99


@pytest.mark.parametrize("n,kind", [(3, "poly"), (2, "rect"), (3, "rect")])
def test_that_low_powers_recover_almost_nothing_at_the_same_load(n, kind):
    histogram = run_recovery_trials(100, 2000, n, kind, trials=200, seed=0)
    assert histogram.recovered_fraction <= 0.05


def test_that_mirror_images_count_only_for_even_polynomials():
    histogram = capacity.OverlapHistogram(N=4, K=3, n=2, kind=capacity.EnergyKind.POLYNOMIAL)
    histogram.record(np.array([-4, 4, 2]), np.array([4, 4, 2]), np.ones(3, dtype=bool))
    assert histogram.perfect_fraction == pytest.approx(1 / 3)
    assert histogram.recovered_fraction == pytest.approx(2 / 3)

    # Odd powers and rectified energies keep the signed statistic.
    for n, kind in ((3, "poly"), (2, "rect")):
        histogram = capacity.OverlapHistogram(N=4, K=3, n=n, kind=capacity.EnergyKind(kind))
        histogram.record(np.array([-4, 4, 2]), np.array([4, 4, 2]), np.ones(3, dtype=bool))
        assert histogram.recovered_fraction == pytest.approx(1 / 3)


def test_that_results_do_not_depend_on_threads_or_chunking():
    kwargs = dict(N=30, K=20, n=2, kind="rect", trials=40, seed=7)
    serial = run_recovery_trials(**kwargs, threads=1, chunk_size=7)
    parallel = run_recovery_trials(**kwargs, threads=3, chunk_size=16)

    # Identical histograms, signed and unsigned.
    assert np.array_equal(serial.counts, parallel.counts)
    assert np.array_equal(serial.unsigned_counts, parallel.unsigned_counts)


def test_that_memories_for_fewer_patterns_are_a_prefix():
    many = random_memories(50, 20, seed=3, key=11)
    few = random_memories(10, 20, seed=3, key=11)
    assert np.array_equal(many.patterns[:10], few.patterns)


def test_that_grid_histograms_are_written_as_csv():
    histograms = run_grid(TrialGrid([20], [5, 10], [2], trials_per_cell=30, seed=1))

    # One histogram per cell, each conserving its trials.
    assert [(h.N, h.K, h.n) for h in histograms] == [(20, 5, 2), (20, 10, 2)]
    assert all(h.total == 30 for h in histograms)

    with tempfile.TemporaryDirectory() as path:
        histograms[0].to_csv(os.path.join(path, "hist.csv"))
        with open(os.path.join(path, "hist.csv")) as f:
            lines = f.read().splitlines()

    # A header and one row per overlap value in [-N, N].
    assert lines[0] == "overlap,count"
    assert len(lines) == 1 + 41
    assert sum(int(line.split(",")[1]) for line in lines[1:]) == 30


def test_that_k_half_brackets_the_half_recovery_load():
    result = find_k_half(30, 3, "poly", trials=100, seed=0)
    fractions = dict(result.path)

    # The reported load recovers at least half, one more memory less than half.
    assert not result.saturated and result.k_half > 0
    assert fractions[result.k_half] >= 0.5
    assert fractions[result.k_half + 1] < 0.5


def test_that_an_unreachable_crossing_is_reported_as_saturated():
    result = find_k_half(30, 5, "poly", trials=20, seed=0, k_bound=8)
    assert result.saturated and result.k_half == 8


@pytest.mark.slow
def test_that_the_half_recovery_load_grows_like_n_squared_at_cubic_power():
    k_half = {
        (N, kind): find_k_half(N, 3, kind, trials=200, seed=0).k_half
        for N in (50, 200) for kind in ("poly", "rect")}

    # Quadrupling N multiplies K_1/2 by roughly N^(n-1) / log N.
    for kind in ("poly", "rect"):
        assert k_half[200, kind] >= 8 * k_half[50, kind]

    # Within a factor of two of the perfect-recovery estimate.
    for (N, kind), value in k_half.items():
        estimate = capacity.k_max_no_errors(N, 3)
        assert estimate / 2 <= value <= 2 * estimate, (N, kind)

    # Rectification never costs capacity.
    for N in (50, 200):
        assert k_half[N, "rect"] >= k_half[N, "poly"]
