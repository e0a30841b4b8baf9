import numpy as np

from attnchain.core_chain import StochasticMatrix, from_raw


def random_stochastic(n: int, seed: int) -> StochasticMatrix:
    rng = np.random.default_rng(seed)
    return from_raw(rng.uniform(size=(n, n)))


def random_distribution(n: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    v = rng.uniform(0.01, 1.0, size=n)
    return v / v.sum()


def planted_block_chain(n: int = 16, target: int = 5) -> StochasticMatrix:
    """Two-block chain: the first half is a metastable object block, the
    second half is background that mostly attends the object, and the
    target token's own row is noisy (spread across both halves)."""
    half = n // 2
    a = np.zeros((n, n))
    a[:half, :half] = 0.98 / half
    a[:half, half:] = 0.02 / half
    a[half:, :half] = 0.70 / half
    a[half:, half:] = 0.30 / half
    a[target, :half] = 0.55 / half
    a[target, half:] = 0.45 / half
    return from_raw(a)
