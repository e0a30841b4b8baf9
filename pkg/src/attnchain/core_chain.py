"""Markov-chain primitives: validated stochastic matrices, teleportation,
bouncing and steady-state power iteration.

A softmaxed attention matrix is a right-stochastic transition kernel; all
operations here treat it as such. Everything is float64 internally and
immutable after construction.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    AlphaOutOfRange,
    DimensionMismatch,
    InvalidDistribution,
    NegativeEntry,
    NonFinite,
    NonSquare,
    RowSumViolation,
    SizeExceeded,
)

ROW = "row"
LEFT = "left"

#: default cap on chain size; the dense n x n kernel must fit in memory
MAX_STATES = 16384

_SUM_TOL = 1e-9
_STRICT_SUM_TOL = 1e-6
_CLAMP_TOL = 1e-9


def _as_float64(entries) -> np.ndarray:
    arr = np.array(entries, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise NonFinite("matrix contains NaN or Inf")
    return arr


@dataclass(frozen=True)
class StochasticMatrix:
    """A validated square stochastic matrix.

    orientation is "row" (rows sum to 1) or "left" (columns sum to 1).
    """

    entries: np.ndarray
    orientation: str = ROW

    def __post_init__(self):
        arr = _as_float64(self.entries)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] < 1:
            raise NonSquare(f"expected a non-empty square matrix, got shape {arr.shape}")
        if self.orientation not in (ROW, LEFT):
            raise ValueError(f"unknown orientation {self.orientation!r}")
        if np.any(arr < 0):
            raise NegativeEntry("stochastic matrix entries must be non-negative")
        axis = 1 if self.orientation == ROW else 0
        sums = arr.sum(axis=axis)
        if np.max(np.abs(sums - 1.0)) > _SUM_TOL:
            raise RowSumViolation(
                f"{'rows' if axis == 1 else 'columns'} must sum to 1 "
                f"(max deviation {np.max(np.abs(sums - 1.0)):.3e})"
            )
        arr.setflags(write=False)
        object.__setattr__(self, "entries", arr)

    @property
    def n(self) -> int:
        return self.entries.shape[0]


@dataclass(frozen=True)
class StateVector:
    """A probability distribution over the chain's states (tokens)."""

    probs: np.ndarray

    def __post_init__(self):
        arr = np.array(self.probs, dtype=np.float64).reshape(-1)
        if not np.all(np.isfinite(arr)):
            raise NonFinite("state vector contains NaN or Inf")
        if arr.size < 1:
            raise InvalidDistribution("state vector must be non-empty")
        if np.any(arr < 0):
            raise InvalidDistribution("probabilities must be non-negative")
        if abs(arr.sum() - 1.0) > _SUM_TOL:
            raise InvalidDistribution(f"probabilities must sum to 1, got {arr.sum()!r}")
        arr.setflags(write=False)
        object.__setattr__(self, "probs", arr)

    @property
    def n(self) -> int:
        return self.probs.shape[0]

    @classmethod
    def uniform(cls, n: int) -> "StateVector":
        return cls(np.full(n, 1.0 / n))

    @classmethod
    def one_hot(cls, n: int, i: int) -> "StateVector":
        if not 0 <= i < n:
            raise InvalidDistribution(f"one-hot index {i} out of range for n={n}")
        v = np.zeros(n)
        v[i] = 1.0
        return cls(v)


@dataclass(frozen=True)
class ChainConfig:
    """Knobs for the teleport-adjusted power iteration."""

    alpha: float = 0.85
    tau: float = 1e-10
    max_iters: int = 1000

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise AlphaOutOfRange(f"alpha must lie in (0, 1), got {self.alpha}")
        if not self.tau > 0.0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be >= 1, got {self.max_iters}")


@dataclass(frozen=True)
class RankResult:
    """Power-iteration outcome plus convergence diagnostics."""

    vector: StateVector
    iterations: int
    residual: float
    converged: bool


def from_raw(entries, repair_policy: str = "clamp_and_renormalize",
             max_states: int = MAX_STATES) -> StochasticMatrix:
    """Build a row-stochastic matrix from raw (possibly dirty) values.

    strict: entries must already be non-negative with rows summing to 1
    within 1e-6. clamp_and_renormalize: tiny negatives (|x| <= 1e-9) are
    clamped to 0, rows are renormalized, and an all-zero row becomes the
    uniform distribution (the dangling-state convention).
    """
    arr = _as_float64(entries)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] < 1:
        raise NonSquare(f"expected a non-empty square matrix, got shape {arr.shape}")
    n = arr.shape[0]
    if n > max_states:
        raise SizeExceeded(f"matrix size {n} exceeds cap {max_states}")

    if repair_policy == "strict":
        if np.any(arr < 0):
            raise NegativeEntry("negative entry in strict mode")
        sums = arr.sum(axis=1)
        if np.max(np.abs(sums - 1.0)) > _STRICT_SUM_TOL:
            raise RowSumViolation(
                f"row sums deviate from 1 by {np.max(np.abs(sums - 1.0)):.3e}"
            )
        arr = arr / sums[:, None]
    elif repair_policy == "clamp_and_renormalize":
        if np.any(arr < -_CLAMP_TOL):
            raise NegativeEntry(
                f"negative entry below clamp tolerance: {arr.min():.3e}"
            )
        arr = np.maximum(arr, 0.0)
        sums = arr.sum(axis=1)
        dangling = sums == 0.0
        arr[dangling] = 1.0 / n
        sums[dangling] = 1.0
        arr = arr / sums[:, None]
    else:
        raise ValueError(f"unknown repair policy {repair_policy!r}")
    return StochasticMatrix(arr, ROW)


def to_left_stochastic(m: StochasticMatrix) -> StochasticMatrix:
    """Column-normalize a row-stochastic matrix; all-zero columns become
    uniform (mirror of the dangling-row convention)."""
    arr = np.array(m.entries)
    sums = arr.sum(axis=0)
    dangling = sums == 0.0
    arr[:, dangling] = 1.0 / m.n
    sums = np.where(dangling, 1.0, sums)
    arr = arr / sums[None, :]
    return StochasticMatrix(arr, LEFT)


def transpose(m: StochasticMatrix) -> StochasticMatrix:
    flipped = LEFT if m.orientation == ROW else ROW
    return StochasticMatrix(m.entries.T.copy(), flipped)


def teleport_adjust(m: StochasticMatrix, alpha: float) -> StochasticMatrix:
    """PageRank adjustment: alpha * P + (1 - alpha) * uniform. The result is
    strictly positive, so the chain is irreducible and aperiodic."""
    if not 0.0 < alpha < 1.0:
        raise AlphaOutOfRange(f"alpha must lie in (0, 1), got {alpha}")
    adjusted = alpha * m.entries + (1.0 - alpha) / m.n
    return StochasticMatrix(adjusted, m.orientation)


def bounce(m: StochasticMatrix, v0: StateVector, n: int) -> StateVector:
    """n successive state transitions: v^T <- v^T M, renormalizing each
    intermediate to absorb floating-point drift. n=0 returns v0."""
    if n < 0:
        raise ValueError(f"bounce count must be >= 0, got {n}")
    if v0.n != m.n:
        raise InvalidDistribution(
            f"vector length {v0.n} does not match matrix size {m.n}"
        )
    v = v0.probs
    for _ in range(n):
        v = v @ m.entries
        v = v / v.sum()
    return StateVector(v) if n > 0 else v0


def power_iterate(m: StochasticMatrix, cfg: ChainConfig,
                  v0: StateVector | None = None) -> RankResult:
    """Raw power iteration on m (no teleport adjustment). Stops when the
    squared L2 step difference falls below cfg.tau or at cfg.max_iters."""
    if v0 is None:
        v0 = StateVector.uniform(m.n)
    if v0.n != m.n:
        raise InvalidDistribution(
            f"vector length {v0.n} does not match matrix size {m.n}"
        )
    v = v0.probs
    residual = np.inf
    iterations = 0
    for iterations in range(1, cfg.max_iters + 1):
        nxt = v @ m.entries
        nxt = nxt / nxt.sum()
        residual = float(np.sum((nxt - v) ** 2))
        v = nxt
        if residual < cfg.tau:
            break
    return RankResult(StateVector(v), iterations, residual, residual < cfg.tau)


def steady_state(m: StochasticMatrix, cfg: ChainConfig,
                 v0: StateVector | None = None) -> RankResult:
    """Stationary vector of the teleport-adjusted chain. Adjustment happens
    internally, so existence and uniqueness are guaranteed."""
    return power_iterate(teleport_adjust(m, cfg.alpha), cfg, v0)


def mix_identity(m: StochasticMatrix) -> StochasticMatrix:
    """0.5 * (I + M): the skip-connection mix. Preserves the stationary
    vector of M exactly while slowing convergence."""
    return StochasticMatrix(0.5 * (np.eye(m.n) + m.entries), m.orientation)


def chain_multiply(a: StochasticMatrix, b: StochasticMatrix) -> StochasticMatrix:
    """Compose two chains (a time-dependent chain run for two steps)."""
    if a.n != b.n:
        raise DimensionMismatch(f"cannot multiply {a.n}-state by {b.n}-state chain")
    prod = a.entries @ b.entries
    prod = prod / prod.sum(axis=1)[:, None]
    return StochasticMatrix(prod, ROW)
