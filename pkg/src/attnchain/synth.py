"""Synthetic chain generators for demos and tests.

Block chains plant metastable structure (large |lambda2|); uniform-random
chains mix almost immediately (small |lambda2|); the relay chain separates
first-order column sums from the steady-state ranking.
"""
from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from .core_chain import StochasticMatrix, from_raw
from .tensor_io import save_array, save_manifest


def random_chain(n: int, seed: int) -> StochasticMatrix:
    """Row-normalized uniform-random entries: a fast-mixing noisy chain."""
    rng = np.random.default_rng(seed)
    return from_raw(rng.uniform(size=(n, n)))


def block_chain(n: int, blocks: int = 2, intra_mass: float = 0.98) -> StochasticMatrix:
    """Chain with `blocks` contiguous metastable groups: each row spreads
    intra_mass uniformly within its block and the remainder uniformly
    over the other tokens."""
    if not 1 <= blocks <= n:
        raise ValueError(f"need 1 <= blocks <= n, got blocks={blocks}, n={n}")
    if not 0.0 < intra_mass <= 1.0:
        raise ValueError(f"intra_mass must lie in (0, 1], got {intra_mass}")
    bounds = [round(b * n / blocks) for b in range(blocks + 1)]
    arr = np.zeros((n, n))
    for b in range(blocks):
        lo, hi = bounds[b], bounds[b + 1]
        size = hi - lo
        rest = n - size
        arr[lo:hi, :] = (1.0 - intra_mass) / rest if rest else 0.0
        arr[lo:hi, lo:hi] = intra_mass / size
    return from_raw(arr)


def relay_chain() -> StochasticMatrix:
    """5-state chain where state 0 receives the most direct attention but
    relays it to state 3, which relays to the mass-retaining state 4.
    Column sums rank state 0 first; the steady state ranks state 4 first."""
    return from_raw([
        [0.05, 0.02, 0.03, 0.85, 0.05],
        [0.80, 0.05, 0.05, 0.05, 0.05],
        [0.80, 0.05, 0.05, 0.05, 0.05],
        [0.05, 0.02, 0.03, 0.05, 0.85],
        [0.25, 0.02, 0.03, 0.05, 0.65],
    ])


def write_single_layer_manifest(out_dir, matrices, grid=None,
                                special_tokens=(), dtype: str = "f64") -> Path:
    """Write a one-layer manifest with the given head matrices; returns the
    manifest path. The grid defaults to square when n is a perfect square."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    n = matrices[0].n
    if grid is None and not special_tokens:
        side = math.isqrt(n)
        if side * side == n:
            grid = (side, side)
    stacked = np.stack([m.entries for m in matrices])
    save_array(out_dir / "layer0.npy", stacked, dtype)
    manifest_path = out_dir / "manifest.json"
    save_manifest(manifest_path, n, grid, list(special_tokens),
                  [(0, len(matrices), dtype, "layer0.npy")])
    return manifest_path
