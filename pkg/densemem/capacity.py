"""
Storage capacity of dense associative memory with random binary
patterns: the closed-form estimates and their Monte-Carlo check.
"""

import csv
import math
import zlib

import numpy as np
import tensorflow as tf

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from scipy.stats import norm
from typing import List, Optional, Sequence, Tuple

from .dynamics import UpdateOrder, evolve_batch
from .energy import EnergyKind, EnergyModel, MemorySet
from .rng import random_spins, spawn_generator


logger = tf.get_logger()

_MEMORY_STREAM = 0
_TRIAL_STREAM = 1


def double_factorial(k: int) -> int:
    """
    k!! for odd k >= 1, with (-1)!! = 1.
    """
    if k < -1 or (k >= 0 and k % 2 == 0):
        raise ValueError(f"double factorial is defined here for odd k >= -1, got {k}")
    return math.prod(range(k, 0, -2)) if k > 0 else 1


def _check_regime(N: int, K: float, n: int):
    if N < 2 or K <= 0 or n < 2:
        raise ValueError(f"need N >= 2, K > 0 and n >= 2, got N={N}, K={K}, n={n}")


def crosstalk_variance(N: int, K: int, n: int) -> float:
    """
    Variance of the energy gap noise, 4 n^2 (2n-3)!! (K-1) N^(n-1).
    """
    _check_regime(N, K, n)
    return 4 * n ** 2 * double_factorial(2 * n - 3) * (K - 1) * float(N) ** (n - 1)


def log_error_probability(N: int, K: float, n: int) -> float:
    """
    Natural logarithm of `error_probability`, finite where the
    probability itself underflows.
    """
    _check_regime(N, K, n)
    load = double_factorial(2 * n - 3) * K / float(N) ** (n - 1)
    return 0.5 * math.log(load / (2 * math.pi)) - 1.0 / (2 * load)


def error_probability(N: int, K: float, n: int) -> float:
    """
    Asymptotic probability that a single bit of a stored pattern is unstable,
    sqrt((2n-3)!!/(2 pi) K/N^(n-1)) exp(-N^(n-1) / (2 K (2n-3)!!)).
    This is the large-N Gaussian tail estimate, valid while K is well below
    N^(n-1); past that regime it is not a probability and exceeds 1
    (about 1.7 at N=100, K=2000, n=2).
    """
    return math.exp(log_error_probability(N, K, n))


def gaussian_error_probability(N: int, K: int, n: int) -> float:
    """
    The Gaussian tail beyond the mean gap N^n - (N-2)^n, without the
    asymptotic expansion.
    """
    variance = crosstalk_variance(N, K, n)
    if variance == 0:
        return 0.0
    gap = float(N) ** n - float(N - 2) ** n
    return float(norm.sf(gap, scale=math.sqrt(variance)))


def k_max_at_error(N: int, n: int, threshold: float = 0.005) -> int:
    """
    Largest K whose asymptotic single-bit error probability is at most `threshold`.
    """
    if not 0 < threshold < 1:
        raise ValueError(f"threshold must lie in (0, 1), got {threshold}")
    if error_probability(N, 1, n) > threshold:
        return 0
    low, high = 1, 2
    while error_probability(N, high, n) <= threshold:
        low, high = high, high * 2
    while high - low > 1:
        middle = (low + high) // 2
        if error_probability(N, middle, n) <= threshold:
            low = middle
        else:
            high = middle
    return low


def alpha_n(N: int, n: int, threshold: float = 0.005) -> float:
    """
    The numerical constant in K_max = alpha_n N^(n-1).
    """
    return k_max_at_error(N, n, threshold) / float(N) ** (n - 1)


def perfect_recovery_capacity(N: int, n: int) -> float:
    """
    N^(n-1) / (2 (2n-3)!! ln N), the load below which no bit of a
    stored pattern is expected to flip.
    """
    if N < 3 or n < 2:
        raise ValueError(f"need N >= 3 and n >= 2, got N={N}, n={n}")
    return float(N) ** (n - 1) / (2 * double_factorial(2 * n - 3) * math.log(N))


def k_max_no_errors(N: int, n: int) -> int:
    return int(round(perfect_recovery_capacity(N, n)))


@dataclass(frozen=True)
class CapacityTheory:
    N: int
    n: int
    error_threshold: float = 0.005

    def __post_init__(self):
        if not 0 < self.error_threshold < 1:
            raise ValueError(f"error_threshold must lie in (0, 1), got {self.error_threshold}")
        if self.n < 2:
            raise ValueError(f"n must be >= 2, got {self.n}")

    @property
    def k_max(self) -> int:
        return k_max_at_error(self.N, self.n, self.error_threshold)

    @property
    def alpha(self) -> float:
        return alpha_n(self.N, self.n, self.error_threshold)

    @property
    def k_max_no_errors(self) -> int:
        return k_max_no_errors(self.N, self.n)

    def error_probability(self, K: int) -> float:
        return error_probability(self.N, K, self.n)


@dataclass(frozen=True)
class TrialGrid:
    N_values: Sequence[int]
    K_values: Sequence[int]
    n_values: Sequence[int]
    trials_per_cell: int = 1000
    seed: int = 0
    kind: EnergyKind = EnergyKind.POLYNOMIAL

    def __post_init__(self):
        if self.trials_per_cell < 1:
            raise ValueError(f"trials_per_cell must be >= 1, got {self.trials_per_cell}")

    def cells(self) -> List[Tuple[int, int, int]]:
        return [(N, K, n) for N in self.N_values for K in self.K_values for n in self.n_values]


@dataclass
class OverlapHistogram:
    """
    Final best overlaps of a batch of recovery trials. `counts[q + N]` is
    the number of trials whose largest signed overlap equals q.
    """
    N: int
    K: int
    n: int
    kind: EnergyKind
    counts: np.ndarray = None
    unsigned_counts: np.ndarray = None
    nonconverged: int = 0

    def __post_init__(self):
        if self.counts is None:
            self.counts = np.zeros(2 * self.N + 1, dtype=np.int64)
        if self.unsigned_counts is None:
            self.unsigned_counts = np.zeros(2 * self.N + 1, dtype=np.int64)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def perfect_fraction(self) -> float:
        return float(self.counts[-1]) / max(self.total, 1)

    @property
    def unsigned_perfect_fraction(self) -> float:
        return float(self.unsigned_counts[-1]) / max(self.total, 1)

    @property
    def recovered_fraction(self) -> float:
        """
        Fraction of trials ending on a stored pattern. An even polynomial
        energy cannot tell a pattern from its mirror image, so for those
        the sign-flipped patterns count as recovered too.
        """
        if self.kind is EnergyKind.POLYNOMIAL and self.n % 2 == 0:
            return self.unsigned_perfect_fraction
        return self.perfect_fraction

    @property
    def mode(self) -> int:
        return int(np.argmax(self.counts)) - self.N

    def record(self, best_overlap: np.ndarray, best_unsigned: np.ndarray, converged: np.ndarray):
        self.counts += np.bincount(best_overlap + self.N, minlength=2 * self.N + 1)
        self.unsigned_counts += np.bincount(best_unsigned + self.N, minlength=2 * self.N + 1)
        self.nonconverged += int(np.count_nonzero(~converged))

    def merge(self, other: "OverlapHistogram") -> "OverlapHistogram":
        self.counts += other.counts
        self.unsigned_counts += other.unsigned_counts
        self.nonconverged += other.nonconverged
        return self

    def to_csv(self, path: str):
        """
        Writes `overlap,count` rows for every overlap value in [-N, N].
        """
        with tf.io.gfile.GFile(path, "w") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(["overlap", "count"])
            for q, count in zip(range(-self.N, self.N + 1), self.counts):
                writer.writerow([q, int(count)])


def cell_key(N: int, K: Optional[int], n: int, kind: EnergyKind) -> int:
    """
    A stable integer naming one cell of a trial grid.
    """
    return zlib.crc32(f"{N}/{K}/{n}/{EnergyKind(kind).value}".encode())


def random_memories(K: int, N: int, *, seed: int, key: int) -> MemorySet:
    """
    K random ±1 patterns. Patterns for K are a prefix of those for any larger K.
    """
    return MemorySet(random_spins(spawn_generator(seed, key, _MEMORY_STREAM), (K, N)))


def _run_chunk(memories, model, seed, key, trials, max_sweeps, update_order):
    generators = [spawn_generator(seed, key, _TRIAL_STREAM, t) for t in trials]
    starts = np.stack([random_spins(g, memories.N) for g in generators])
    return evolve_batch(
        starts, memories, model,
        generators=generators,
        max_sweeps=max_sweeps,
        update_order=update_order,
    )


def run_recovery_trials(
    N: int,
    K: int,
    n: int,
    kind: EnergyKind = EnergyKind.POLYNOMIAL,
    trials: int = 10000,
    seed: int = 0,
    *,
    max_sweeps: int = 200,
    update_order: UpdateOrder = UpdateOrder.RANDOM,
    threads: int = 1,
    chunk_size: int = 250,
    key: Optional[int] = None,
    memories: Optional[MemorySet] = None,
) -> OverlapHistogram:
    """
    Stores K random patterns, evolves `trials` random initial states to
    convergence and histograms the best overlap each reaches. Trial t
    draws from the stream (seed, key, t), so the outcome does not depend
    on `threads` or `chunk_size`.
    """
    kind = EnergyKind(kind)
    model = EnergyModel(n, kind)
    key = cell_key(N, K, n, kind) if key is None else key
    if memories is None:
        memories = random_memories(K, N, seed=seed, key=key)
    chunks = [range(start, min(start + chunk_size, trials)) for start in range(0, trials, chunk_size)]

    def run(chunk):
        return _run_chunk(memories, model, seed, key, chunk, max_sweeps, update_order)

    histogram = OverlapHistogram(N=N, K=K, n=n, kind=kind)
    with ThreadPoolExecutor(max_workers=max(threads, 1)) as pool:
        for report in pool.map(run, chunks):
            histogram.record(report.best_overlap, report.best_unsigned_overlap, report.converged)
    if histogram.nonconverged:
        logger.warning(
            f"{histogram.nonconverged} of {trials} trials did not converge "
            f"within {max_sweeps} sweeps (N={N}, K={K}, n={n}, {kind.value})")
    return histogram


def run_grid(grid: TrialGrid, **kwargs) -> List[OverlapHistogram]:
    """
    Runs every (N, K, n) cell of the grid, each with freshly drawn memories.
    """
    histograms = []
    for N, K, n in grid.cells():
        logger.info(f"recovery trials N={N} K={K} n={n} kind={EnergyKind(grid.kind).value}")
        histograms.append(run_recovery_trials(
            N, K, n, grid.kind, grid.trials_per_cell, grid.seed, **kwargs))
    return histograms


@dataclass
class KHalfResult:
    N: int
    n: int
    kind: EnergyKind
    k_half: int
    fraction: float
    saturated: bool = False
    path: List[Tuple[int, float]] = field(default_factory=list)


def find_k_half(
    N: int,
    n: int,
    kind: EnergyKind = EnergyKind.POLYNOMIAL,
    trials: int = 1000,
    seed: int = 0,
    *,
    k_bound: Optional[int] = None,
    **kwargs,
) -> KHalfResult:
    """
    Finds the largest K at which at least half of the random initial states
    converge exactly onto a stored pattern. Every K tried reuses the same
    start states and a prefix of the same pattern list, so the recovered
    fraction is compared on common random numbers along the search.
    """
    kind = EnergyKind(kind)
    key = cell_key(N, None, n, kind)
    guess = max(1, k_max_no_errors(N, n)) if N >= 3 else 1
    k_bound = k_bound or 16 * guess
    pool = random_memories(k_bound, N, seed=seed, key=key)
    path = []

    def fraction(K):
        memories = MemorySet(pool.patterns[:K])
        histogram = run_recovery_trials(
            N, K, n, kind, trials, seed, key=key, memories=memories, **kwargs)
        path.append((K, histogram.perfect_fraction))
        logger.info(f"K_1/2 search N={N} n={n} {kind.value}: K={K} fraction={histogram.perfect_fraction:.3f}")
        return histogram.perfect_fraction

    # Bracket the crossing by doubling or halving from the perfect-recovery estimate.
    low, high = None, None
    K = min(guess, k_bound)
    value = fraction(K)
    if value >= 0.5:
        low = (K, value)
        while low[0] < k_bound:
            K = min(2 * low[0], k_bound)
            value = fraction(K)
            if value < 0.5:
                high = (K, value)
                break
            low = (K, value)
        if high is None:
            return KHalfResult(N, n, kind, low[0], low[1], saturated=True, path=path)
    else:
        high = (K, value)
        while high[0] > 1:
            K = max(high[0] // 2, 1)
            value = fraction(K)
            if value >= 0.5:
                low = (K, value)
                break
            high = (K, value)
        if low is None:
            return KHalfResult(N, n, kind, 0, value, path=path)

    # Bisect between the bracketing loads.
    while high[0] - low[0] > 1:
        K = (low[0] + high[0]) // 2
        value = fraction(K)
        if value >= 0.5:
            low = (K, value)
        else:
            high = (K, value)

    ordered = sorted(path)
    if any(b[1] > a[1] for a, b in zip(ordered, ordered[1:])):
        logger.warning(f"recovered fraction is not monotone in K along the search: {ordered}")
    return KHalfResult(N, n, kind, low[0], low[1], path=path)
