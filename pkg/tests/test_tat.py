import math

import numpy as np
import pytest

from dmgsl import autodiff as ad
from dmgsl.autodiff import Tape, Tensor
from dmgsl.rng import substream
from dmgsl.tat import (
    AttentionHeads,
    LstmParams,
    batched_temporal_attention,
    causal_mask,
    init_attention_heads,
    init_lstm_params,
    lstm_cell,
    lstm_unroll,
    tat_forward,
    temporal_attention,
)


def _zero_lstm(dim):
    def z(*shape):
        return Tensor(np.zeros(shape), requires_grad=True)

    return LstmParams(
        w_i=z(dim, 2 * dim), w_f=z(dim, 2 * dim), w_o=z(dim, 2 * dim), w_c=z(dim, 2 * dim),
        b_i=z(dim), b_f=z(dim), b_o=z(dim), b_c=z(dim),
    )


class TestLstmCell:
    def test_all_zero_parameters_closed_form(self):
        dim = 3
        params = _zero_lstm(dim)
        e = Tensor(np.zeros(dim))
        s0 = Tensor(np.ones(dim))
        c0 = Tensor(np.ones(dim))
        s1, c1 = lstm_cell(e, s0, c0, params)
        # gates sigmoid(0)=0.5, candidate tanh(0)=0 -> c=0.5, s=0.5*tanh(0.5)
        expected = 0.5 * math.tanh(0.5)
        assert np.all(np.abs(c1.data - 0.5) < 1e-15)
        assert np.all(np.abs(s1.data - expected) < 1e-9)
        assert round(float(s1.data[0]), 6) == 0.231059

    def test_saturated_forget_gate(self):
        dim = 2
        params = _zero_lstm(dim)
        params.b_f.data = np.full(dim, -100.0)
        s1, c1 = lstm_cell(Tensor(np.zeros(dim)), Tensor(np.ones(dim)), Tensor(np.ones(dim)), params)
        assert np.all(np.abs(c1.data) < 1e-8)
        assert np.all(np.abs(s1.data) < 1e-8)

    def test_gradients_for_all_eight_parameters(self, numeric_grad, grads_close):
        dim = 3
        rng = np.random.default_rng(0)
        params = init_lstm_params(dim, substream(0, "init"))
        e = Tensor(rng.normal(size=dim))
        s0 = Tensor(np.ones(dim))
        c0 = Tensor(np.ones(dim))
        weights = rng.normal(size=dim)

        def build():
            s1, c1 = lstm_cell(e, s0, c0, params)
            return ad.mul(ad.add(s1, c1), weights).sum()

        tensors = [t for _, t in params.named()]
        assert len(tensors) == 8
        with Tape() as tape:
            loss = build()
        tape.backward(loss, tensors)
        for t in tensors:
            grads_close(t.grad, numeric_grad(lambda: build().item(), t.data))


class TestLstmUnroll:
    def test_single_step_equals_cell(self):
        dim = 4
        params = init_lstm_params(dim, substream(1, "init"))
        rng = np.random.default_rng(1)
        e = Tensor(rng.random((3, dim)))
        states = lstm_unroll([e], params)
        ones = Tensor(np.ones((3, dim)))
        s_direct, _ = lstm_cell(e, ones, ones, params)
        assert len(states) == 1
        assert np.array_equal(states[0].data, s_direct.data)

    def test_identical_rows_stay_identical(self):
        dim = 3
        params = init_lstm_params(dim, substream(2, "init"))
        rng = np.random.default_rng(2)
        seq = []
        for _ in range(4):
            row = rng.random(dim)
            seq.append(Tensor(np.vstack([row, row])))
        for s in lstm_unroll(seq, params):
            assert np.array_equal(s.data[0], s.data[1])

    def test_output_shapes(self):
        dim = 5
        params = init_lstm_params(dim, substream(3, "init"))
        seq = [Tensor(np.random.default_rng(3).random((6, dim))) for _ in range(3)]
        states = lstm_unroll(seq, params)
        assert all(s.shape == (6, dim) for s in states)


class TestCausalMask:
    def test_single_step(self):
        assert np.array_equal(causal_mask(1), [[0.0]])

    def test_three_steps(self):
        inf = -np.inf
        expected = np.array([[0.0, inf, inf], [0.0, 0.0, inf], [0.0, 0.0, 0.0]])
        assert np.array_equal(causal_mask(3), expected)

    def test_every_row_has_unmasked_entry(self):
        for t in (1, 2, 5, 9):
            m = causal_mask(t)
            assert np.all((m == 0.0).any(axis=1))


class TestTemporalAttention:
    def test_single_step_returns_value_projection(self):
        f, fp = 4, 3
        rng = np.random.default_rng(4)
        heads = init_attention_heads(f, fp, 1, substream(4, "init"))
        s = Tensor(rng.random((1, f)))
        z = temporal_attention(s, heads, causal_mask(1))
        assert np.allclose(z.data, s.data @ heads.heads[0][2].data, atol=1e-12)

    def test_zero_query_averages_prefix(self):
        f, fp, t = 3, 2, 5
        heads = init_attention_heads(f, fp, 1, substream(5, "init"))
        heads.heads[0] = (Tensor(np.zeros((f, fp))), heads.heads[0][1], heads.heads[0][2])
        rng = np.random.default_rng(5)
        s = Tensor(rng.random((t, f)))
        z = temporal_attention(s, heads, causal_mask(t))
        v = s.data @ heads.heads[0][2].data
        for row in range(t):
            assert np.allclose(z.data[row], v[: row + 1].mean(axis=0), atol=1e-12)

    def test_future_perturbation_leaves_prefix_bit_identical(self):
        f, fp, t = 4, 3, 6
        heads = init_attention_heads(f, fp, 2, substream(6, "init"))
        rng = np.random.default_rng(6)
        base = rng.random((t, f))
        z0 = temporal_attention(Tensor(base), heads, causal_mask(t)).data
        for t_perturb in (2, 4):
            bumped = base.copy()
            bumped[t_perturb:] += rng.random((t - t_perturb, f)) + 0.5
            z1 = temporal_attention(Tensor(bumped), heads, causal_mask(t)).data
            assert np.array_equal(z0[:t_perturb], z1[:t_perturb])
            assert not np.allclose(z0[t_perturb:], z1[t_perturb:])

    def test_batched_matches_per_node(self):
        n, t, f, fp = 5, 4, 3, 2
        heads = init_attention_heads(f, fp, 2, substream(7, "init"))
        rng = np.random.default_rng(7)
        states = rng.random((n, t, f))
        z_batched = batched_temporal_attention(Tensor(states), heads, causal_mask(t)).data
        for i in range(n):
            z_i = temporal_attention(Tensor(states[i]), heads, causal_mask(t)).data
            assert np.allclose(z_batched[i], z_i, atol=1e-12)

    def test_weight_rows_are_probabilities(self):
        n, t, f, fp = 4, 5, 3, 2
        heads = init_attention_heads(f, fp, 3, substream(8, "init"))
        states = np.random.default_rng(8).random((n, t, f))
        _, gammas = batched_temporal_attention(Tensor(states), heads, causal_mask(t), return_weights=True)
        for gamma in gammas:
            sums = gamma.data.sum(axis=-1)
            assert np.all(np.abs(sums - 1.0) < 1e-10)
            assert np.all(gamma.data[:, 0, 1:] == 0.0)  # first step sees only itself


class TestTatForward:
    def test_single_step_identity_value_head(self):
        n, d = 4, 3
        f = d  # state width equals input width
        params = _zero_lstm(f)
        heads = AttentionHeads(heads=[(Tensor(np.zeros((f, f))), Tensor(np.zeros((f, f))), Tensor(np.eye(f)))])
        rng = np.random.default_rng(9)
        e = Tensor(rng.random((n, d)))
        out = tat_forward([e], params, heads)
        s1 = lstm_unroll([e], params)[0]
        assert np.allclose(out.data, s1.data, atol=1e-12)

    def test_output_shape(self):
        n, d, fp, k = 6, 4, 3, 2
        params = init_lstm_params(d, substream(10, "init"))
        heads = init_attention_heads(d, fp, k, substream(11, "init"))
        seq = [Tensor(np.random.default_rng(12).random((n, d))) for _ in range(3)]
        assert tat_forward(seq, params, heads).shape == (n, k * fp)

    def test_two_heads_concatenate_single_head_runs(self):
        n, d, fp = 5, 3, 2
        params = init_lstm_params(d, substream(13, "init"))
        heads = init_attention_heads(d, fp, 2, substream(14, "init"))
        rng = np.random.default_rng(15)
        seq = [Tensor(rng.random((n, d))) for _ in range(4)]
        both = tat_forward(seq, params, heads).data
        first = tat_forward(seq, params, AttentionHeads(heads=[heads.heads[0]])).data
        second = tat_forward(seq, params, AttentionHeads(heads=[heads.heads[1]])).data
        assert np.allclose(both, np.hstack([first, second]), atol=1e-12)

    def test_node_permutation_equivariance(self):
        n, d, fp = 6, 3, 2
        params = init_lstm_params(d, substream(16, "init"))
        heads = init_attention_heads(d, fp, 2, substream(17, "init"))
        rng = np.random.default_rng(18)
        seq_data = [rng.random((n, d)) for _ in range(3)]
        out = tat_forward([Tensor(x) for x in seq_data], params, heads).data
        perm = rng.permutation(n)
        out_p = tat_forward([Tensor(x[perm]) for x in seq_data], params, heads).data
        assert np.array_equal(out[perm], out_p)

    def test_gradient_through_unroll_and_attention(self, numeric_grad, grads_close):
        n, d, fp = 3, 2, 2
        params = init_lstm_params(d, substream(19, "init"))
        heads = init_attention_heads(d, fp, 1, substream(20, "init"))
        rng = np.random.default_rng(21)
        seq = [Tensor(rng.random((n, d)), requires_grad=True) for _ in range(3)]
        weights = rng.normal(size=(n, fp))

        def build():
            return ad.mul(tat_forward(seq, params, heads), weights).sum()

        targets = seq + [params.w_i, params.b_f, heads.heads[0][0], heads.heads[0][2]]
        with Tape() as tape:
            loss = build()
        tape.backward(loss, targets)
        for t in targets:
            grads_close(t.grad, numeric_grad(lambda: build().item(), t.data))
