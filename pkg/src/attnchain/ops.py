"""Attention-operation vocabulary built on the chain primitives.

Row/column select, column sums, multi-bounce propagation, TokenRank,
head aggregation, and column masking, plus the token-importance orderings
used by the progressive masking experiment.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .core_chain import (
    ChainConfig,
    RankResult,
    StateVector,
    StochasticMatrix,
    bounce,
    steady_state,
    to_left_stochastic,
    transpose,
)
from .errors import (
    AllTokensMasked,
    DimensionMismatch,
    EmptyHeadList,
    IndexOutOfRange,
    InvalidWeights,
    MissingGrid,
    MissingSpecialTokens,
)
from .spectral import lambda2_weights


class Direction(enum.Enum):
    """Incoming attention finds authoritative tokens (flow into); outgoing
    attention finds hub tokens (flow out of, via the column-normalized
    transposed chain)."""

    INCOMING = "incoming"
    OUTGOING = "outgoing"


@dataclass(frozen=True)
class AttentionTensor:
    """A stack of per-layer, per-head stochastic matrices plus token
    metadata (grid shape and non-spatial special tokens)."""

    matrices: tuple  # layers x heads nested tuples of StochasticMatrix
    special_tokens: tuple = ()
    grid: tuple | None = None

    def __post_init__(self):
        mats = tuple(tuple(layer) for layer in self.matrices)
        if not mats or not mats[0]:
            raise EmptyHeadList("tensor needs at least one layer and head")
        n = mats[0][0].n
        heads = len(mats[0])
        for layer in mats:
            if len(layer) != heads:
                raise DimensionMismatch("layers must have equal head counts")
            for m in layer:
                if m.n != n:
                    raise DimensionMismatch("all matrices must share seq_len")
        special = tuple(sorted(self.special_tokens))
        if len(set(special)) != len(special):
            raise IndexOutOfRange("special token indices must be unique")
        if special and not (0 <= special[0] and special[-1] < n):
            raise IndexOutOfRange("special token index out of range")
        if self.grid is not None:
            h, w = self.grid
            if h * w + len(special) != n:
                raise DimensionMismatch(
                    f"grid {h}x{w} plus {len(special)} special tokens != seq_len {n}"
                )
            object.__setattr__(self, "grid", (int(h), int(w)))
        object.__setattr__(self, "matrices", mats)
        object.__setattr__(self, "special_tokens", special)

    @property
    def layers(self) -> int:
        return len(self.matrices)

    @property
    def heads(self) -> int:
        return len(self.matrices[0])

    @property
    def seq_len(self) -> int:
        return self.matrices[0][0].n

    def spatial_indices(self) -> list[int]:
        """Sequence indices of spatial (non-special) tokens, in order."""
        special = set(self.special_tokens)
        return [i for i in range(self.seq_len) if i not in special]


def _check_index(m: StochasticMatrix, i: int):
    if not 0 <= i < m.n:
        raise IndexOutOfRange(f"token index {i} out of range for n={m.n}")


def row_select(m: StochasticMatrix, i: int) -> StateVector:
    """Attention given by token i: a single transition from one-hot(i)."""
    _check_index(m, i)
    return bounce(m, StateVector.one_hot(m.n, i), 1)


def column_select(m: StochasticMatrix, j: int) -> StateVector:
    """Attention given to token j, as a distribution: column j of the
    column-normalized matrix, renormalized to sum 1."""
    _check_index(m, j)
    col = to_left_stochastic(m).entries[:, j]
    return StateVector(col / col.sum())


def column_sum(m: StochasticMatrix) -> StateVector:
    """Aggregate attention received per token: one transition from the
    uniform state (column sums divided by n)."""
    return bounce(m, StateVector.uniform(m.n), 1)


def _outgoing_chain(m: StochasticMatrix) -> StochasticMatrix:
    return transpose(to_left_stochastic(m))


def multi_bounce(m: StochasticMatrix, i: int, n: int,
                 direction: Direction = Direction.INCOMING) -> StateVector:
    """n-th order attention for token i. n=1 incoming is row-select, n=1
    outgoing is column-select; larger n propagates indirect attention."""
    _check_index(m, i)
    if n < 1:
        raise ValueError(f"bounce count must be >= 1, got {n}")
    chain = m if direction == Direction.INCOMING else _outgoing_chain(m)
    return bounce(chain, StateVector.one_hot(m.n, i), n)


def token_rank(m: StochasticMatrix, cfg: ChainConfig,
               direction: Direction = Direction.INCOMING) -> RankResult:
    """Global token importance: the stationary vector of the
    teleport-adjusted chain (incoming) or its outgoing counterpart."""
    chain = m if direction == Direction.INCOMING else _outgoing_chain(m)
    return steady_state(chain, cfg)


def rank_tokens(v: StateVector) -> list[int]:
    """Token indices by descending score; ties break to the lower index."""
    return [int(i) for i in np.argsort(-v.probs, kind="stable")]


def aggregate_heads(heads: list[StochasticMatrix], scheme: str = "uniform",
                    weights: list[float] | None = None) -> StochasticMatrix:
    """Convex combination of head chains: a mixture chain.

    scheme is "uniform", "lambda2" (weights from the spectral summary), or
    "explicit" (caller-supplied non-negative weights summing to 1).
    """
    if not heads:
        raise EmptyHeadList("need at least one head")
    n = heads[0].n
    if any(h.n != n for h in heads):
        raise DimensionMismatch("heads must share the same state count")
    if scheme == "uniform":
        w = np.full(len(heads), 1.0 / len(heads))
    elif scheme == "lambda2":
        w = np.array(lambda2_weights(heads).weights)
    elif scheme == "explicit":
        if weights is None or len(weights) != len(heads):
            raise InvalidWeights("explicit scheme needs one weight per head")
        w = np.asarray(weights, dtype=np.float64)
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
            raise InvalidWeights("weights must be non-negative and sum to 1")
    else:
        raise ValueError(f"unknown aggregation scheme {scheme!r}")
    mixed = sum(wi * h.entries for wi, h in zip(w, heads))
    mixed = mixed / mixed.sum(axis=1)[:, None]
    return StochasticMatrix(mixed)


def mask_columns(m: StochasticMatrix, tokens: set[int]) -> StochasticMatrix:
    """Zero the given columns and renormalize rows; equivalent to setting
    the pre-softmax logits of those columns to -inf. A row left with no
    mass becomes uniform over the unmasked tokens."""
    tokens = set(tokens)
    for t in tokens:
        if not 0 <= t < m.n:
            raise IndexOutOfRange(f"token index {t} out of range for n={m.n}")
    if len(tokens) >= m.n:
        raise AllTokensMasked("at least one token must remain unmasked")
    if not tokens:
        return m
    arr = np.array(m.entries)
    masked = np.array(sorted(tokens))
    arr[:, masked] = 0.0
    sums = arr.sum(axis=1)
    empty = sums == 0.0
    if np.any(empty):
        keep = np.setdiff1d(np.arange(m.n), masked)
        arr[np.ix_(np.where(empty)[0], keep)] = 1.0 / keep.size
        sums = arr.sum(axis=1)
    arr = arr / sums[:, None]
    arr[:, masked] = 0.0  # renormalization must not reintroduce mass
    return StochasticMatrix(arr)


MASKING_STRATEGIES = ("random", "center-token", "column-sum", "cls-token",
                      "token-rank")


def _center_token(tensor: AttentionTensor) -> int:
    if tensor.grid is None:
        raise MissingGrid("center-token strategy requires a spatial grid")
    h, w = tensor.grid
    flat = (h // 2) * w + (w // 2)
    return tensor.spatial_indices()[flat]


def _pooled_matrix(tensor: AttentionTensor, layer_fraction: float,
                   head_scheme: str) -> StochasticMatrix:
    if not 0.0 < layer_fraction <= 1.0:
        raise ValueError(f"layer_fraction must lie in (0, 1], got {layer_fraction}")
    n_layers = math.ceil(layer_fraction * tensor.layers)
    per_layer = [aggregate_heads(list(layer), head_scheme)
                 for layer in tensor.matrices[:n_layers]]
    pooled = sum(m.entries for m in per_layer) / len(per_layer)
    pooled = pooled / pooled.sum(axis=1)[:, None]
    return StochasticMatrix(pooled)


def masking_order(tensor: AttentionTensor, strategy: str, cfg: ChainConfig,
                  layer_fraction: float = 0.5, seed: int | None = None,
                  lambda2_weighting: bool = False) -> list[int]:
    """Maskable tokens sorted by descending importance under a strategy.

    Importance is computed on heads pooled over the first
    ceil(layer_fraction * layers) layers; special tokens are never
    maskable. The random strategy requires a seed for determinism.
    """
    if strategy not in MASKING_STRATEGIES:
        raise ValueError(f"unknown masking strategy {strategy!r}")
    maskable = tensor.spatial_indices()

    if strategy == "random":
        if seed is None:
            raise ValueError("random strategy requires a seed")
        rng = np.random.default_rng(seed)
        return [maskable[i] for i in rng.permutation(len(maskable))]

    scheme = "lambda2" if lambda2_weighting else "uniform"
    m = _pooled_matrix(tensor, layer_fraction, scheme)
    if strategy == "column-sum":
        scores = column_sum(m).probs
    elif strategy == "token-rank":
        scores = token_rank(m, cfg, Direction.INCOMING).vector.probs
    elif strategy == "center-token":
        scores = column_select(m, _center_token(tensor)).probs
    elif strategy == "cls-token":
        if not tensor.special_tokens:
            raise MissingSpecialTokens("cls-token strategy needs special tokens")
        scores = row_select(m, tensor.special_tokens[0]).probs
    maskable_arr = np.array(maskable)
    order = np.argsort(-scores[maskable_arr], kind="stable")
    return [int(maskable_arr[i]) for i in order]
