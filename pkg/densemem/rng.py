import numpy as np


def spawn_generator(seed: int, *key: int) -> np.random.Generator:
    """
    Returns an independent Philox stream keyed by `seed` and an
    arbitrary tuple of non-negative integers (cell, trial, epoch, ...).
    The same key always yields the same stream, regardless of which
    thread asks for it or in what order.
    """
    entropy = [int(seed)] + [int(k) for k in key]
    if any(k < 0 for k in entropy):
        raise ValueError(f"seed and key must be non-negative, got {entropy}")
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


def random_spins(generator: np.random.Generator, shape) -> np.ndarray:
    """
    Draws uniform ±1 spins. Uses one double per entry, so a draw of
    shape (K, N) is a row-prefix of any draw of shape (K', N), K' > K.
    """
    return np.where(generator.random(shape) < 0.5, -1, 1).astype(np.int8)
