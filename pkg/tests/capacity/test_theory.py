import math

import pytest

from densemem import capacity
from densemem.capacity import CapacityTheory
from itertools import product as outer


def test_double_factorial():
    assert [capacity.double_factorial(k) for k in (-1, 1, 3, 5, 7)] == [1, 1, 3, 15, 105]
    with pytest.raises(ValueError):
        capacity.double_factorial(4)


def test_that_perfect_recovery_capacities_match_the_published_values():

    # N = 100 for n = 2, 3, 4.
    assert capacity.k_max_no_errors(100, 2) == 11
    assert abs(capacity.k_max_no_errors(100, 3) - 360) <= 2
    assert abs(capacity.k_max_no_errors(100, 4) - 7240) <= 5


@pytest.mark.parametrize("N,n", list(outer([50, 100, 1000], [2, 3, 4, 5])))
def test_that_raising_the_power_multiplies_capacity_by_N_over_2n_minus_1(N, n):
    ratio = capacity.perfect_recovery_capacity(N, n + 1) / capacity.perfect_recovery_capacity(N, n)
    assert math.isclose(ratio, N / (2 * n - 1), rel_tol=1e-12)


def test_that_the_error_probability_evaluates_the_closed_form():

    # A small load is well below one percent.
    assert math.isclose(capacity.error_probability(100, 11, 2), 1.4e-3, rel_tol=0.02)

    # An overloaded network is far beyond any retrieval threshold.
    assert capacity.error_probability(100, 2000, 2) > 0.2

    # The exact Gaussian tail vanishes without crosstalk.
    assert capacity.gaussian_error_probability(100, 1, 3) == 0.0


def test_that_the_error_probability_is_monotone():

    # Increasing in K.
    values = [capacity.error_probability(100, K, 3) for K in range(50, 5000, 50)]
    assert all(a < b for a, b in zip(values, values[1:]))

    # Decreasing in N.
    values = [capacity.error_probability(N, 500, 3) for N in range(50, 500, 10)]
    assert all(a > b for a, b in zip(values, values[1:]))

    # Decreasing in n, in log space past the float underflow at n = 5.
    values = [capacity.log_error_probability(100, 500, n) for n in range(2, 8)]
    assert all(a > b for a, b in zip(values, values[1:]))
    assert capacity.error_probability(100, 500, 6) == 0.0


def test_that_the_log_error_probability_agrees_where_nothing_underflows():
    for N, K, n in outer([50, 100], [10, 100, 1000], [2, 3]):
        assert math.isclose(
            math.exp(capacity.log_error_probability(N, K, n)),
            capacity.error_probability(N, K, n), rel_tol=1e-12)


def test_that_the_asymptotic_form_exceeds_one_when_overloaded():

    # About 1.74 at N=100, K=2000, n=2, beyond its regime of validity.
    assert 1.7 < capacity.error_probability(100, 2000, 2) < 1.8

    # The un-approximated tail stays a probability.
    assert 0 < capacity.gaussian_error_probability(100, 2000, 2) < 0.5


@pytest.mark.parametrize("N,K,n", list(outer([50, 100], [20, 400], [2, 3])))
def test_that_the_gaussian_tail_matches_the_complementary_error_function(N, K, n):
    variance = 4 * n ** 2 * capacity.double_factorial(2 * n - 3) * (K - 1) * N ** (n - 1)
    gap = N ** n - (N - 2) ** n
    expected = 0.5 * math.erfc(gap / math.sqrt(2 * variance))
    assert math.isclose(capacity.gaussian_error_probability(N, K, n), expected, rel_tol=1e-9, abs_tol=1e-300)


def test_that_the_standard_model_stores_fourteen_percent_of_N():

    # K / N approaches 0.14 for n = 2.
    theory = CapacityTheory(N=10000, n=2)
    assert abs(theory.alpha - 0.14) <= 0.01
    assert theory.error_probability(theory.k_max) <= 0.005 < theory.error_probability(theory.k_max + 1)

    # A vanishing threshold leaves no capacity.
    assert capacity.k_max_at_error(100, 2, 1e-30) == 0


def test_that_cubic_capacity_scales_with_N_squared():
    ratio = capacity.k_max_at_error(200, 3) / capacity.k_max_at_error(100, 3)
    assert abs(ratio - 4) < 0.02


def test_that_invalid_thresholds_are_rejected():
    with pytest.raises(ValueError):
        CapacityTheory(100, 3, error_threshold=0)
    with pytest.raises(ValueError):
        CapacityTheory(100, 1)
