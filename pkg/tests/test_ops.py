import numpy as np
import pytest

from attnchain import errors
from attnchain.core_chain import (
    ChainConfig,
    StateVector,
    from_raw,
    to_left_stochastic,
)
from attnchain.ops import (
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
from attnchain.synth import block_chain, random_chain, relay_chain

from helpers import random_stochastic


class TestSelectOps:
    def test_row_select_is_the_matrix_row(self):
        m = random_stochastic(6, 100)
        for i in range(6):
            np.testing.assert_allclose(row_select(m, i).probs,
                                       m.entries[i], atol=1e-15)

    def test_column_select_is_the_normalized_column(self):
        m = random_stochastic(6, 101)
        for j in range(6):
            col = m.entries[:, j]
            np.testing.assert_allclose(column_select(m, j).probs,
                                       col / col.sum(), atol=1e-12)

    def test_column_sum_is_scaled_column_totals(self):
        m = random_stochastic(6, 102)
        np.testing.assert_allclose(column_sum(m).probs,
                                   m.entries.sum(axis=0) / 6, atol=1e-15)

    def test_index_errors(self):
        m = random_stochastic(3, 103)
        with pytest.raises(errors.IndexOutOfRange):
            row_select(m, 3)
        with pytest.raises(errors.IndexOutOfRange):
            column_select(m, -1)


class TestMultiBounce:
    def test_incoming_n1_equals_row_select(self):
        m = random_stochastic(5, 110)
        for i in range(5):
            np.testing.assert_allclose(
                multi_bounce(m, i, 1, Direction.INCOMING).probs,
                row_select(m, i).probs, atol=1e-15)

    def test_outgoing_n1_equals_column_select(self):
        m = random_stochastic(5, 111)
        for i in range(5):
            np.testing.assert_allclose(
                multi_bounce(m, i, 1, Direction.OUTGOING).probs,
                column_select(m, i).probs, atol=1e-12)

    def test_outgoing_matches_transposed_left_chain_oracle(self):
        m = random_stochastic(5, 112)
        chain = to_left_stochastic(m).entries.T
        got = multi_bounce(m, 2, 3, Direction.OUTGOING)
        expected = np.eye(5)[2] @ np.linalg.matrix_power(chain, 3)
        np.testing.assert_allclose(got.probs, expected, atol=1e-12)

    def test_rejects_zero_bounces(self):
        with pytest.raises(ValueError):
            multi_bounce(random_stochastic(3, 113), 0, 0)


class TestTokenRank:
    def test_incoming_agrees_with_oracle(self, tight_config):
        from attnchain.core_chain import teleport_adjust
        from attnchain.spectral import dense_left_eigvec_oracle
        m = random_stochastic(7, 120)
        r = token_rank(m, tight_config)
        oracle = dense_left_eigvec_oracle(teleport_adjust(m, tight_config.alpha))
        np.testing.assert_allclose(r.vector.probs, oracle.probs, atol=1e-8)

    def test_outgoing_runs_on_the_transposed_chain(self, tight_config):
        from attnchain.core_chain import steady_state, transpose
        m = random_stochastic(7, 121)
        r = token_rank(m, tight_config, Direction.OUTGOING)
        direct = steady_state(transpose(to_left_stochastic(m)), tight_config)
        np.testing.assert_allclose(r.vector.probs, direct.vector.probs,
                                   atol=1e-12)

    def test_relay_chain_separates_rankings(self, tight_config):
        m = relay_chain()
        by_colsum = rank_tokens(column_sum(m))
        by_rank = rank_tokens(token_rank(m, tight_config).vector)
        assert by_colsum[0] == 0
        assert by_rank[0] == 4

    def test_rank_tokens_stable_ties(self):
        v = StateVector([0.25, 0.25, 0.25, 0.25])
        assert rank_tokens(v) == [0, 1, 2, 3]


class TestAggregateHeads:
    def test_uniform_average_of_identical_heads(self):
        m = random_stochastic(5, 130)
        out = aggregate_heads([m, m, m])
        np.testing.assert_allclose(out.entries, m.entries, atol=1e-12)

    def test_explicit_weights_mix(self):
        a, b = random_stochastic(4, 131), random_stochastic(4, 132)
        out = aggregate_heads([a, b], "explicit", [0.25, 0.75])
        np.testing.assert_allclose(out.entries,
                                   0.25 * a.entries + 0.75 * b.entries,
                                   atol=1e-12)

    def test_lambda2_scheme_prefers_the_structured_head(self):
        structured = block_chain(8, 2, 0.98)
        noisy = random_chain(8, 133)
        out = aggregate_heads([structured, noisy], "lambda2")
        # the mixture should sit much closer to the structured head
        d_structured = np.abs(out.entries - structured.entries).max()
        d_noisy = np.abs(out.entries - noisy.entries).max()
        assert d_structured < d_noisy

    def test_result_is_row_stochastic(self):
        heads = [random_stochastic(6, s) for s in range(134, 138)]
        out = aggregate_heads(heads, "uniform")
        np.testing.assert_allclose(out.entries.sum(axis=1), 1.0, atol=1e-12)

    def test_errors(self):
        with pytest.raises(errors.EmptyHeadList):
            aggregate_heads([])
        with pytest.raises(errors.InvalidWeights):
            aggregate_heads([random_stochastic(3, 138)], "explicit", [0.5])
        with pytest.raises(errors.InvalidWeights):
            aggregate_heads([random_stochastic(3, 139),
                             random_stochastic(3, 140)], "explicit", [0.5, 0.6])
        with pytest.raises(ValueError):
            aggregate_heads([random_stochastic(3, 141)], "nope")


class TestMaskColumns:
    def test_masked_columns_are_exactly_zero(self):
        m = random_stochastic(6, 150)
        out = mask_columns(m, {1, 4})
        assert (out.entries[:, [1, 4]] == 0.0).all()
        np.testing.assert_allclose(out.entries.sum(axis=1), 1.0, atol=1e-12)

    def test_unmasked_ratios_preserved(self):
        m = random_stochastic(6, 151)
        out = mask_columns(m, {0})
        keep = [1, 2, 3, 4, 5]
        for i in range(6):
            expected = m.entries[i, keep] / m.entries[i, keep].sum()
            np.testing.assert_allclose(out.entries[i, keep], expected,
                                       atol=1e-12)

    def test_starved_row_becomes_uniform_over_survivors(self):
        m = from_raw([[1, 0, 0], [0, 0.5, 0.5], [0, 0, 1]])
        out = mask_columns(m, {0})
        np.testing.assert_array_equal(out.entries[0], [0, 0.5, 0.5])

    def test_empty_mask_is_identity(self):
        m = random_stochastic(4, 152)
        assert mask_columns(m, set()) is m

    def test_errors(self):
        m = random_stochastic(3, 153)
        with pytest.raises(errors.AllTokensMasked):
            mask_columns(m, {0, 1, 2})
        with pytest.raises(errors.IndexOutOfRange):
            mask_columns(m, {5})


def grid_tensor(layers=4, heads=2, side=3, special=(0,), seed=160):
    n = side * side + len(special)
    mats = tuple(
        tuple(random_stochastic(n, seed + 10 * li + h) for h in range(heads))
        for li in range(layers)
    )
    return AttentionTensor(mats, special, (side, side))


class TestAttentionTensor:
    def test_shape_properties(self):
        t = grid_tensor()
        assert (t.layers, t.heads, t.seq_len) == (4, 2, 10)
        assert t.spatial_indices() == list(range(1, 10))

    def test_grid_arithmetic_enforced(self):
        m = random_stochastic(10, 163)
        with pytest.raises(errors.DimensionMismatch):
            AttentionTensor(((m,),), special_tokens=(0,), grid=(3, 2))  # 6+1 != 10

    def test_ragged_heads_rejected(self):
        m = random_stochastic(4, 161)
        with pytest.raises(errors.DimensionMismatch):
            AttentionTensor(((m, m), (m,)))

    def test_special_token_bounds(self):
        m = random_stochastic(4, 162)
        with pytest.raises(errors.IndexOutOfRange):
            AttentionTensor(((m,),), special_tokens=(4,))


class TestMaskingOrder:
    def test_random_is_seed_deterministic_and_excludes_special(self):
        t = grid_tensor()
        cfg = ChainConfig()
        a = masking_order(t, "random", cfg, seed=7)
        b = masking_order(t, "random", cfg, seed=7)
        c = masking_order(t, "random", cfg, seed=8)
        assert a == b and a != c
        assert sorted(a) == t.spatial_indices()
        with pytest.raises(ValueError):
            masking_order(t, "random", cfg)

    @pytest.mark.parametrize("strategy",
                             ["column-sum", "token-rank", "center-token",
                              "cls-token"])
    def test_score_strategies_are_permutations_of_spatial_tokens(self, strategy):
        t = grid_tensor()
        order = masking_order(t, strategy, ChainConfig())
        assert sorted(order) == t.spatial_indices()

    def test_column_sum_order_matches_pooled_scores(self):
        t = grid_tensor(layers=2, heads=1)
        cfg = ChainConfig()
        order = masking_order(t, "column-sum", cfg, layer_fraction=0.5)
        # layer_fraction 0.5 of 2 layers pools only layer 0
        scores = column_sum(t.matrices[0][0]).probs
        spatial = t.spatial_indices()
        expected = [spatial[i] for i in
                    np.argsort(-scores[np.array(spatial)], kind="stable")]
        assert order == expected

    def test_center_token_requires_grid(self):
        m = random_stochastic(4, 170)
        t = AttentionTensor(((m,),))
        with pytest.raises(errors.MissingGrid):
            masking_order(t, "center-token", ChainConfig())

    def test_cls_token_requires_special_tokens(self):
        m = random_stochastic(4, 171)
        t = AttentionTensor(((m,),), grid=(2, 2))
        with pytest.raises(errors.MissingSpecialTokens):
            masking_order(t, "cls-token", ChainConfig())

    def test_unknown_strategy(self):
        with pytest.raises(ValueError):
            masking_order(grid_tensor(), "alphabetical", ChainConfig())
