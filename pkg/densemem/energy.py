"""
Energy functions of dense associative memory and the configuration
energy of binary spins, E = -sum_mu F(sum_i xi^mu_i sigma_i).

The scalar functions work on Python numbers, numpy arrays and
TensorFlow tensors alike, so the classifier kernels share them.
"""

import enum

import numpy as np
import tensorflow as tf

from dataclasses import dataclass
from typing import Union

from .errors import ShapeMismatchError, StaleCacheError


class EnergyKind(enum.Enum):
    POLYNOMIAL = "poly"
    RECTIFIED = "rect"


@dataclass(frozen=True)
class EnergyModel:
    """
    An energy function F of integer power n, either x^n
    everywhere or rectified to zero for negative arguments.
    """
    power: int
    kind: EnergyKind = EnergyKind.RECTIFIED

    def __post_init__(self):
        if isinstance(self.kind, str):
            object.__setattr__(self, "kind", EnergyKind(self.kind))
        if int(self.power) != self.power or self.power < 1:
            raise ValueError(f"power must be an integer >= 1, got {self.power}")
        object.__setattr__(self, "power", int(self.power))

    @property
    def rectified(self) -> bool:
        return self.kind is EnergyKind.RECTIFIED

    def F(self, x):
        return eval_F(x, self)

    def f(self, x):
        return eval_f(x, self)

    def __str__(self):
        return f"{self.kind.value}{self.power}"


def _backend(x):
    return tf if tf.is_tensor(x) else np


def _as_real(x):
    if tf.is_tensor(x):
        return x if x.dtype.is_floating else tf.cast(x, tf.float64)
    return np.asarray(x, dtype=np.float64)


def as_float64(x) -> tf.Tensor:
    """
    A float64 tensor from a tensor or variable of any dtype, or from array-likes.
    """
    if tf.is_tensor(x):
        return tf.cast(x, tf.float64)
    return tf.convert_to_tensor(x, dtype=tf.float64)


def ipow(x, power: int):
    """
    Raises `x` to a non-negative integer power by repeated squaring.
    """
    if power < 0:
        raise ValueError(f"power must be non-negative, got {power}")
    result = None
    base = x
    while power:
        if power & 1:
            result = base if result is None else result * base
        power >>= 1
        if power:
            base = base * base
    return _backend(x).ones_like(x) if result is None else result


def rep(x, power: int):
    """
    Rectified power max(x, 0)^power, with rep(x, 0) the unit step
    (1 for x > 0, else 0).
    """
    xp = _backend(x)
    x = _as_real(x)
    if power == 0:
        return xp.where(x > 0, xp.ones_like(x), xp.zeros_like(x))
    return ipow(xp.maximum(x, xp.zeros_like(x)), power)


def eval_F(x, model: EnergyModel):
    """
    The energy function F(x).
    """
    if model.rectified:
        return rep(x, model.power)
    return ipow(_as_real(x), model.power)


def eval_f(x, model: EnergyModel):
    """
    The derivative f = F'. The rectified kind takes f(0) = 0.
    """
    n = model.power
    if model.rectified:
        return n * rep(x, n - 1)
    x = _as_real(x)
    if n == 1:
        return _backend(x).ones_like(x)
    return n * ipow(x, n - 1)


def eval_f_prime(x, model: EnergyModel):
    """
    The second derivative F''. Zero on the rectified branch x <= 0.
    """
    n = model.power
    x = _as_real(x)
    if n == 1:
        return _backend(x).zeros_like(x)
    if model.rectified:
        return n * (n - 1) * rep(x, n - 2)
    if n == 2:
        return 2 * _backend(x).ones_like(x)
    return n * (n - 1) * ipow(x, n - 2)


def _check_spins(values: np.ndarray, what: str):
    if values.size and not np.all(np.abs(values) == 1):
        raise ValueError(f"{what} entries must all be -1 or +1")


class SpinState:
    """
    A configuration of N binary neurons. Every mutation goes through
    `flip`, which bumps a counter that overlap caches check against.
    """

    def __init__(self, values):
        values = np.array(values, dtype=np.int8).reshape(-1)
        _check_spins(values, "spin")
        self._values = values
        self._version = 0

    @property
    def values(self) -> np.ndarray:
        view = self._values.view()
        view.flags.writeable = False
        return view

    @property
    def version(self) -> int:
        return self._version

    def __len__(self):
        return self._values.shape[0]

    def __getitem__(self, i):
        return int(self._values[i])

    def flip(self, i: int):
        self._values[i] = -self._values[i]
        self._version += 1

    def copy(self) -> "SpinState":
        return SpinState(self._values.copy())


class MemorySet:
    """
    K stored binary patterns over N neurons, read-only after construction.
    """

    def __init__(self, patterns):
        patterns = np.array(patterns, dtype=np.int8)
        if patterns.ndim == 1:
            patterns = patterns[None]
        if patterns.ndim != 2 or patterns.shape[0] < 1:
            raise ValueError(f"patterns must be a non-empty K x N matrix, got shape {patterns.shape}")
        _check_spins(patterns, "memory")
        patterns.flags.writeable = False
        self.patterns = patterns

    @property
    def K(self) -> int:
        return self.patterns.shape[0]

    @property
    def N(self) -> int:
        return self.patterns.shape[1]

    def overlaps(self, state: Union[SpinState, np.ndarray]) -> np.ndarray:
        """
        Returns m_mu = sum_i xi^mu_i sigma_i as exact integers.
        """
        values = state.values if isinstance(state, SpinState) else np.asarray(state)
        if values.shape[-1] != self.N:
            raise ShapeMismatchError(f"state has {values.shape[-1]} spins, memories have {self.N}")
        return values.astype(np.int64) @ self.patterns.T.astype(np.int64)


class OverlapCache:
    """
    The overlaps m_mu of one SpinState, kept in sync flip by flip in O(K).
    """

    def __init__(self, memories: MemorySet, state: SpinState):
        self.overlaps = memories.overlaps(state)
        self.version = state.version

    def check(self, state: SpinState):
        if self.version != state.version:
            raise StaleCacheError(
                f"overlap cache is at version {self.version}, state at {state.version}")

    def flip(self, memories: MemorySet, state: SpinState, i: int):
        """
        Flips spin i of `state` and updates the overlaps: m += -2 xi_i sigma_i^old.
        """
        self.check(state)
        self.overlaps -= 2 * memories.patterns[:, i].astype(np.int64) * state[i]
        state.flip(i)
        self.version = state.version

    def verify(self, memories: MemorySet, state: SpinState):
        """
        Recomputes the overlaps from scratch and raises if they disagree.
        """
        self.check(state)
        if not np.array_equal(self.overlaps, memories.overlaps(state)):
            raise StaleCacheError("overlap cache disagrees with a full recomputation")


def energy_from_overlaps(overlaps, model: EnergyModel) -> float:
    """
    Returns -sum_mu F(m_mu).
    """
    return -float(np.sum(eval_F(overlaps, model)))


def total_energy(memories: MemorySet, state: SpinState, model: EnergyModel) -> float:
    """
    Returns the configuration energy E = -sum_mu F(sum_i xi^mu_i sigma_i).
    """
    return energy_from_overlaps(memories.overlaps(state), model)


def energy_gap(
    memories: MemorySet,
    state: SpinState,
    i: int,
    model: EnergyModel,
    cache: OverlapCache,
) -> float:
    """
    Returns E(sigma_i = -1) - E(sigma_i = +1), with all other spins
    at their current values, in O(K) from the cached overlaps.
    """
    cache.check(state)
    column = memories.patterns[:, i].astype(np.int64)
    rest = cache.overlaps - column * state[i]
    return float(np.sum(eval_F(rest + column, model) - eval_F(rest - column, model)))
