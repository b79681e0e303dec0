import math

import numpy as np
import pytest

from pkg.core.errors import ContractError
from pkg.core.numerics import Tape, finite_diff_check
from pkg.model.encoder import (
    InteractionSequence,
    encode,
    encode_attention,
    encode_attention_states,
    encode_gru,
    gru_cell,
    next_item_loss,
    score_items,
)
from pkg.model.optim import AdamState, adam_step
from pkg.model.params import ITEM_EMBEDDINGS, ParamSet

M = 20
D = 8


def _bind(params):
    tape = Tape()
    return tape, tape.bind(params)


def _random_params(kind, seed, n_items=M, dim=D):
    return ParamSet.initialize(kind, n_items, dim=dim, seed=seed, init_scale=0.5)


class TestInteractionSequence:
    def test_timestamps_must_match_and_be_nondecreasing(self):
        InteractionSequence("u", (1, 2, 3), (1, 1, 5))
        with pytest.raises(ContractError):
            InteractionSequence("u", (1, 2), (1,))
        with pytest.raises(ContractError):
            InteractionSequence("u", (1, 2), (5, 4))


class TestGru:
    def test_zero_weights_zero_state(self):
        params = ParamSet.zeros("gru", M, dim=D)
        tape, p = _bind(params)
        x = tape.constant(np.arange(D, dtype=float))
        h = tape.constant(np.zeros(D))
        np.testing.assert_array_equal(gru_cell(p, x, h).value, np.zeros(D))

    def test_closed_update_gate_carries_state(self):
        params = _random_params("gru", 0)
        params = params.replace({"gru.b_z": np.full(D, -1e3), "gru.W_z": np.zeros((D, D)), "gru.U_z": np.zeros((D, D))})
        tape, p = _bind(params)
        rng = np.random.default_rng(1)
        h = tape.constant(rng.normal(size=D))
        out = gru_cell(p, tape.constant(rng.normal(size=D)), h)
        np.testing.assert_allclose(out.value, h.value, atol=1e-12)

    def test_shape_mismatch(self):
        tape, p = _bind(_random_params("gru", 0))
        with pytest.raises(ContractError):
            gru_cell(p, tape.constant(np.zeros(D)), tape.constant(np.zeros(D + 1)))

    def test_length_one_is_one_cell(self):
        params = _random_params("gru", 2)
        tape, p = _bind(params)
        expected = gru_cell(p, tape.constant(params[ITEM_EMBEDDINGS][4]), tape.constant(np.zeros(D)))
        np.testing.assert_allclose(encode_gru(p, [4]).value, expected.value, atol=1e-15)

    def test_zero_params_encode_to_zero(self):
        _, p = _bind(ParamSet.zeros("gru", M, dim=D))
        np.testing.assert_array_equal(encode_gru(p, [1, 5, 7]).value, np.zeros(D))

    def test_empty_sequence_rejected(self):
        _, p = _bind(_random_params("gru", 0))
        with pytest.raises(ContractError):
            encode_gru(p, [])

    def test_order_sensitive(self):
        for seed in range(10):
            rng = np.random.default_rng(seed)
            params = _random_params("gru", seed)
            seq = [int(i) for i in rng.choice(M, size=5, replace=False)]
            _, p = _bind(params)
            original = encode_gru(p, seq).value
            permuted = encode_gru(p, seq[::-1]).value
            assert not np.allclose(original, permuted)


class TestAttention:
    def test_length_one(self):
        params = _random_params("attention", 3)
        _, p = _bind(params)
        x = params[ITEM_EMBEDDINGS][6] + params["attn.positional"][0]
        expected = params["attn.W_o"] @ (params["attn.W_v"] @ x) + x
        np.testing.assert_allclose(encode_attention(p, [6]).value, expected, atol=1e-12)

    def test_causal_prefix_unchanged(self):
        rng = np.random.default_rng(4)
        params = _random_params("attention", 4)
        seq = [int(i) for i in rng.integers(0, M, size=7)]
        _, p = _bind(params)
        full = encode_attention_states(p, seq).value
        for t in range(1, len(seq)):
            _, p = _bind(params)
            prefix = encode_attention_states(p, seq[:t]).value
            assert np.array_equal(prefix, full[:t])

    def test_length_limit(self):
        params = ParamSet.initialize("attention", M, dim=D, max_len=4)
        _, p = _bind(params)
        with pytest.raises(ContractError):
            encode_attention(p, [1, 2, 3, 4, 5])


class TestScoring:
    def test_orthonormal_rows(self):
        params = ParamSet.zeros("attention", 6, dim=6)
        params = params.replace({ITEM_EMBEDDINGS: np.vstack([np.eye(6), np.zeros((1, 6))])})
        tape, p = _bind(params)
        for j in range(6):
            logits = score_items(p, tape.constant(np.eye(6)[j])).value
            assert int(np.argmax(logits)) == j
            assert logits.shape == (6,)

    def test_zero_h(self):
        tape, p = _bind(_random_params("gru", 0))
        np.testing.assert_array_equal(score_items(p, tape.constant(np.zeros(D))).value, np.zeros(M))

    def test_matches_naive_loop_and_is_linear(self):
        params = _random_params("attention", 5)
        rng = np.random.default_rng(5)
        h = rng.normal(size=D)
        tape, p = _bind(params)
        vectorized = score_items(p, tape.constant(h)).value
        naive = np.array([float(np.dot(h, params[ITEM_EMBEDDINGS][i])) for i in range(M)])
        np.testing.assert_allclose(vectorized, naive, atol=1e-12)
        scaled = score_items(p, tape.constant(2.5 * h)).value
        np.testing.assert_allclose(scaled, 2.5 * vectorized, atol=1e-12)


class TestNextItemLoss:
    @pytest.mark.parametrize("kind", ["gru", "attention"])
    def test_zero_params_uniform(self, kind):
        _, p = _bind(ParamSet.zeros(kind, 200, dim=D))
        assert next_item_loss(p, [3, 4, 5], 9, kind).item() == pytest.approx(math.log(200), abs=1e-9)

    def test_dominant_target(self):
        params = ParamSet.zeros("gru", M, dim=D)
        table = np.zeros((M + 1, D))
        table[2, 0] = 1e3
        params = params.replace({ITEM_EMBEDDINGS: table, "gru.b_h": np.full(D, 10.0), "gru.b_z": np.full(D, 10.0)})
        _, p = _bind(params)
        # h ≈ tanh(10)·1，target 的 logit 约为 1e3
        assert next_item_loss(p, [0], 2, "gru").item() == pytest.approx(0.0, abs=1e-9)

    @pytest.mark.parametrize("kind", ["gru", "attention"])
    def test_one_adam_step_decreases_loss(self, kind):
        params = _random_params(kind, 6)
        seq, target = [1, 4, 9, 3], 12
        tape, p = _bind(params)
        loss = next_item_loss(p, seq, target, kind)
        grads = tape.backward(loss)
        updated, _ = adam_step(params, grads, AdamState.zeros(params), 1e-3, 0.0)
        _, p2 = _bind(updated)
        assert next_item_loss(p2, seq, target, kind).item() < loss.item()

    @pytest.mark.parametrize("kind", ["gru", "attention"])
    @pytest.mark.parametrize("loss_positions", ["last", "all"])
    def test_loss_is_positive(self, kind, loss_positions):
        _, p = _bind(_random_params(kind, 7))
        assert next_item_loss(p, [1, 2, 3], 4, kind, loss_positions).item() > 0


class TestGradients:
    @pytest.mark.parametrize("kind", ["gru", "attention"])
    @pytest.mark.parametrize("seed", range(20))
    def test_encoder_pipeline_gradients(self, kind, seed):
        rng = np.random.default_rng(seed)
        window = {"max_len": 6} if kind == "attention" else {}
        params = ParamSet.initialize(kind, M, dim=D, seed=seed, init_scale=0.5, **window)
        length = int(rng.integers(1, 7))
        seq = [int(i) for i in rng.integers(0, M, size=length)]
        target = int(rng.integers(0, M))
        tensors = {name: params[name] for name in params}
        err = finite_diff_check(lambda p: next_item_loss(p, seq, target, kind), tensors)
        assert err < 1e-4

    def test_attention_all_positions_gradients(self):
        params = ParamSet.initialize("attention", M, dim=D, seed=11, max_len=6, init_scale=0.5)
        tensors = {name: params[name] for name in params}
        err = finite_diff_check(lambda p: next_item_loss(p, [3, 1, 4, 1, 5], 9, "attention", "all"), tensors)
        assert err < 1e-4

    def test_encode_dispatch(self):
        _, p = _bind(_random_params("gru", 0))
        with pytest.raises(ContractError):
            encode(p, [1], "transformer")
