"""Attention matrices as discrete-time Markov chains.

Multi-bounce attention, TokenRank steady states, lambda2 head weighting,
zero-shot segmentation maps and metrics, and a file-based tensor exchange
format (manifest JSON + NPY v1.0).
"""

from .core_chain import (
    ChainConfig,
    RankResult,
    StateVector,
    StochasticMatrix,
    bounce,
    chain_multiply,
    from_raw,
    mix_identity,
    power_iterate,
    steady_state,
    teleport_adjust,
    to_left_stochastic,
    transpose,
)
from .ops import (
    AttentionTensor,
    Direction,
    aggregate_heads,
    column_select,
    column_sum,
    mask_columns,
    masking_order,
    multi_bounce,
    rank_tokens,
    row_select,
    token_rank,
)
from .spectral import SpectralSummary, dense_left_eigvec_oracle, lambda2, lambda2_weights

__all__ = [
    "AttentionTensor",
    "ChainConfig",
    "Direction",
    "RankResult",
    "SpectralSummary",
    "StateVector",
    "StochasticMatrix",
    "aggregate_heads",
    "bounce",
    "chain_multiply",
    "column_select",
    "column_sum",
    "dense_left_eigvec_oracle",
    "from_raw",
    "lambda2",
    "lambda2_weights",
    "mask_columns",
    "masking_order",
    "mix_identity",
    "multi_bounce",
    "power_iterate",
    "rank_tokens",
    "row_select",
    "steady_state",
    "teleport_adjust",
    "to_left_stochastic",
    "token_rank",
    "transpose",
]

__version__ = "0.1.0"
