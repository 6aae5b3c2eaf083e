"""
Asynchronous energy-descent dynamics: each update sets one spin to
the sign of its energy gap, leaving it alone on an exact tie.
"""

import enum

import numpy as np

from dataclasses import dataclass, field
from typing import List, Optional, Sequence

from .energy import EnergyModel, MemorySet, OverlapCache, SpinState
from .energy import energy_from_overlaps, energy_gap, eval_F
from .errors import ShapeMismatchError
from .rng import spawn_generator
from .data import xor_dataset


UNDECIDABLE = 0


class UpdateOrder(enum.Enum):
    RANDOM = "random"
    FIXED = "fixed"


@dataclass(frozen=True)
class DynamicsConfig:
    max_sweeps: int = 100
    update_order: UpdateOrder = UpdateOrder.RANDOM
    seed: int = 0
    record_energy: bool = False

    def __post_init__(self):
        if isinstance(self.update_order, str):
            object.__setattr__(self, "update_order", UpdateOrder(self.update_order))
        if self.max_sweeps < 1:
            raise ValueError(f"max_sweeps must be >= 1, got {self.max_sweeps}")


@dataclass
class ConvergenceReport:
    final_state: SpinState
    sweeps_used: int
    converged: bool
    best_overlap: int
    best_memory_index: int
    best_unsigned_overlap: int
    energies: List[float] = field(default_factory=list)


@dataclass
class BatchReport:
    """
    Outcome of `evolve_batch`, one entry per trial.
    """
    final_states: np.ndarray
    sweeps_used: np.ndarray
    converged: np.ndarray
    best_overlap: np.ndarray
    best_memory_index: np.ndarray
    best_unsigned_overlap: np.ndarray


def update_spin(
    state: SpinState,
    i: int,
    memories: MemorySet,
    model: EnergyModel,
    cache: OverlapCache,
) -> bool:
    """
    Sets spin i to the sign of its energy gap. Returns whether it flipped.
    """
    gap = energy_gap(memories, state, i, model, cache)
    if gap == 0 or (gap > 0) == (state[i] > 0):
        return False
    cache.flip(memories, state, i)
    return True


def _visit_order(order: UpdateOrder, N: int, generator: Optional[np.random.Generator]):
    if order is UpdateOrder.FIXED:
        return np.arange(N)
    return generator.permutation(N)


def evolve(
    state: SpinState,
    memories: MemorySet,
    model: EnergyModel,
    cfg: DynamicsConfig = DynamicsConfig(),
    *,
    generator: Optional[np.random.Generator] = None,
) -> ConvergenceReport:
    """
    Sweeps over all spins until a sweep makes no flip or `cfg.max_sweeps`
    sweeps have run. The input state is left untouched.
    """
    if len(state) != memories.N:
        raise ShapeMismatchError(f"state has {len(state)} spins, memories have {memories.N}")
    if generator is None:
        generator = spawn_generator(cfg.seed)
    state = state.copy()
    cache = OverlapCache(memories, state)
    energies = [energy_from_overlaps(cache.overlaps, model)] if cfg.record_energy else []

    converged = False
    sweeps = 0
    while sweeps < cfg.max_sweeps and not converged:
        sweeps += 1
        flips = 0
        for i in _visit_order(cfg.update_order, memories.N, generator):
            if update_spin(state, int(i), memories, model, cache):
                flips += 1
                if cfg.record_energy:
                    energies.append(energy_from_overlaps(cache.overlaps, model))
        converged = flips == 0

    best = int(np.argmax(cache.overlaps))
    return ConvergenceReport(
        final_state=state,
        sweeps_used=sweeps,
        converged=converged,
        best_overlap=int(cache.overlaps[best]),
        best_memory_index=best,
        best_unsigned_overlap=int(np.max(np.abs(cache.overlaps))),
        energies=energies,
    )


def evolve_batch(
    states: np.ndarray,
    memories: MemorySet,
    model: EnergyModel,
    *,
    generators: Optional[Sequence[np.random.Generator]] = None,
    max_sweeps: int = DynamicsConfig.max_sweeps,
    update_order: UpdateOrder = UpdateOrder.RANDOM,
) -> BatchReport:
    """
    Runs `evolve` on T independent trials at once. Each trial still
    updates one spin at a time in its own order, drawn from its own
    generator, so trial t ends exactly where `evolve` would with
    `generators[t]`.
    """
    update_order = UpdateOrder(update_order)
    sigma = np.array(states, dtype=np.int64)
    if sigma.ndim != 2 or sigma.shape[1] != memories.N:
        raise ShapeMismatchError(f"states must be T x {memories.N}, got {sigma.shape}")
    T, N = sigma.shape
    if update_order is UpdateOrder.RANDOM and (generators is None or len(generators) != T):
        raise ValueError("random update order needs one generator per trial")

    columns = memories.patterns.T.astype(np.int64)
    overlaps = sigma @ columns
    sweeps_used = np.zeros(T, dtype=np.int64)
    converged = np.zeros(T, dtype=bool)
    active = np.arange(T)

    for sweep in range(1, max_sweeps + 1):
        if not active.size:
            break
        if update_order is UpdateOrder.RANDOM:
            orders = np.stack([generators[t].permutation(N) for t in active])
        else:
            orders = np.broadcast_to(np.arange(N), (active.size, N))
        flips = np.zeros(active.size, dtype=np.int64)

        for step in range(N):
            i = orders[:, step]
            xi = columns[i]
            s = sigma[active, i]
            rest = overlaps[active] - xi * s[:, None]
            gap = np.sum(eval_F(rest + xi, model) - eval_F(rest - xi, model), axis=1)
            new = np.where(gap == 0, s, np.sign(gap).astype(np.int64))
            changed = new != s
            if changed.any():
                trials = active[changed]
                overlaps[trials] -= 2 * xi[changed] * s[changed][:, None]
                sigma[trials, i[changed]] = new[changed]
                flips[changed] += 1

        sweeps_used[active] = sweep
        settled = flips == 0
        converged[active[settled]] = True
        active = active[~settled]

    return BatchReport(
        final_states=sigma.astype(np.int8),
        sweeps_used=sweeps_used,
        converged=converged,
        best_overlap=overlaps.max(axis=1),
        best_memory_index=overlaps.argmax(axis=1),
        best_unsigned_overlap=np.abs(overlaps).max(axis=1),
    )


def xor_memories() -> MemorySet:
    """
    The four rows of the XOR truth table as stored memories over (x, y, z).
    """
    return MemorySet(xor_dataset())


def xor_energy(x, y, z, model: EnergyModel) -> float:
    """
    Energy of the three-spin XOR network storing the truth table,
    -(-x-y-z)^n - (-x+y+z)^n - (x-y+z)^n - (x+y-z)^n for the polynomial kind.
    """
    overlaps = np.array([-x - y - z, -x + y + z, x - y + z, x + y - z], dtype=np.float64)
    return -float(np.sum(eval_F(overlaps, model)))


def xor_solve(x: int, y: int, model: EnergyModel) -> int:
    """
    Clamps the inputs and returns the output z in {-1, +1} of lower energy,
    or UNDECIDABLE when both outputs have the same energy.
    """
    gap = xor_energy(x, y, -1, model) - xor_energy(x, y, 1, model)
    return int(np.sign(gap)) if gap != 0 else UNDECIDABLE
