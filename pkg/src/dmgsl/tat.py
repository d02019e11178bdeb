"""Temporal attention over snapshot sequences.

A shared LSTM runs independently over each node's sequence of merged views,
then causal masked scaled dot-product attention (multi-head) mixes the
per-node state sequence across time. Only the final-time rows feed the
contrastive head downstream.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor, as_tensor
from .errors import ShapeError


@dataclass
class LstmParams:
    w_i: Tensor  # F x 2D; the gate input is [e_t || s_{t-1}], so F must equal D
    w_f: Tensor
    w_o: Tensor
    w_c: Tensor
    b_i: Tensor  # F
    b_f: Tensor
    b_o: Tensor
    b_c: Tensor

    @property
    def state_dim(self) -> int:
        return self.w_i.shape[0]

    def named(self, prefix: str = "lstm") -> list[tuple[str, Tensor]]:
        return [
            (f"{prefix}.w_i", self.w_i),
            (f"{prefix}.w_f", self.w_f),
            (f"{prefix}.w_o", self.w_o),
            (f"{prefix}.w_c", self.w_c),
            (f"{prefix}.b_i", self.b_i),
            (f"{prefix}.b_f", self.b_f),
            (f"{prefix}.b_o", self.b_o),
            (f"{prefix}.b_c", self.b_c),
        ]


@dataclass
class AttentionHeads:
    heads: list[tuple[Tensor, Tensor, Tensor]]  # (w_q, w_k, w_v), each F x F'

    @property
    def n_heads(self) -> int:
        return len(self.heads)

    @property
    def head_dim(self) -> int:
        return self.heads[0][0].shape[1]

    def named(self, prefix: str = "head") -> list[tuple[str, Tensor]]:
        out = []
        for h, (wq, wk, wv) in enumerate(self.heads):
            out += [(f"{prefix}.{h}.wq", wq), (f"{prefix}.{h}.wk", wk), (f"{prefix}.{h}.wv", wv)]
        return out


def init_lstm_params(dim: int, rng: np.random.Generator) -> LstmParams:
    # F = D: the concatenated gate input has width 2D
    bound = np.sqrt(1.0 / (2 * dim))

    def w():
        return Tensor(rng.uniform(-bound, bound, size=(dim, 2 * dim)), requires_grad=True)

    def b():
        return Tensor(np.zeros(dim), requires_grad=True)

    return LstmParams(w_i=w(), w_f=w(), w_o=w(), w_c=w(), b_i=b(), b_f=b(), b_o=b(), b_c=b())


def init_attention_heads(state_dim: int, head_dim: int, n_heads: int, rng: np.random.Generator) -> AttentionHeads:
    bound = np.sqrt(1.0 / state_dim)

    def w():
        return Tensor(rng.uniform(-bound, bound, size=(state_dim, head_dim)), requires_grad=True)

    return AttentionHeads(heads=[(w(), w(), w()) for _ in range(n_heads)])


def lstm_cell(e, s_prev, c_prev, params: LstmParams):
    """One LSTM step; accepts single vectors or n x D batches of rows."""
    e, s_prev, c_prev = as_tensor(e), as_tensor(s_prev), as_tensor(c_prev)
    squeeze = e.ndim == 1
    if squeeze:
        e = e.reshape(1, e.shape[0])
        s_prev = s_prev.reshape(1, s_prev.shape[0])
        c_prev = c_prev.reshape(1, c_prev.shape[0])
    z = ad.concat([e, s_prev], axis=1)
    i = ad.sigmoid(ad.add(ad.matmul(z, ad.transpose(params.w_i)), params.b_i))
    f = ad.sigmoid(ad.add(ad.matmul(z, ad.transpose(params.w_f)), params.b_f))
    o = ad.sigmoid(ad.add(ad.matmul(z, ad.transpose(params.w_o)), params.b_o))
    c_tilde = ad.tanh(ad.add(ad.matmul(z, ad.transpose(params.w_c)), params.b_c))
    c = ad.add(ad.mul(f, c_prev), ad.mul(i, c_tilde))
    s = ad.mul(o, ad.tanh(c))
    if squeeze:
        s = s.reshape(s.shape[1])
        c = c.reshape(c.shape[1])
    return s, c


def lstm_unroll(e_seq: list, params: LstmParams) -> list[Tensor]:
    """Shared-parameter recurrence over time; state starts at all ones."""
    first = as_tensor(e_seq[0])
    n = first.shape[0]
    f_dim = params.state_dim
    s = Tensor(np.ones((n, f_dim)))
    c = Tensor(np.ones((n, f_dim)))
    states = []
    for e_t in e_seq:
        s, c = lstm_cell(as_tensor(e_t), s, c, params)
        states.append(s)
    return states


def causal_mask(t_steps: int) -> np.ndarray:
    """Additive mask: row u may attend to columns <= u; later columns get -inf."""
    if t_steps < 1:
        raise ShapeError(f"causal_mask: need T >= 1, got {t_steps}")
    m = np.zeros((t_steps, t_steps), dtype=np.float64)
    m[np.triu_indices(t_steps, k=1)] = -np.inf
    return m


def temporal_attention(s_i, heads: AttentionHeads, mask: np.ndarray) -> Tensor:
    """Masked scaled dot-product attention over one node's T x F states."""
    s_i = as_tensor(s_i)
    scale = 1.0 / math.sqrt(heads.head_dim)
    outs = []
    for wq, wk, wv in heads.heads:
        q = ad.matmul(s_i, wq)
        k = ad.matmul(s_i, wk)
        v = ad.matmul(s_i, wv)
        gamma = ad.softmax(ad.mul(ad.matmul(q, ad.transpose(k)), scale), mask=mask, axis=-1)
        outs.append(ad.matmul(gamma, v))
    return ad.concat(outs, axis=1)


def batched_temporal_attention(states, heads: AttentionHeads, mask: np.ndarray, return_weights: bool = False):
    """Same attention applied to all nodes at once; input n x T x F.

    With return_weights, also gives the per-head n x T x T weight matrices.
    """
    states = as_tensor(states)
    n, t_steps, f_dim = states.shape
    flat = states.reshape(n * t_steps, f_dim)
    scale = 1.0 / math.sqrt(heads.head_dim)
    outs, gammas = [], []
    for wq, wk, wv in heads.heads:
        q = ad.matmul(flat, wq).reshape(n, t_steps, heads.head_dim)
        k = ad.matmul(flat, wk).reshape(n, t_steps, heads.head_dim)
        v = ad.matmul(flat, wv).reshape(n, t_steps, heads.head_dim)
        scores = ad.mul(ad.bmm(q, ad.transpose(k)), scale)
        gamma = ad.softmax(scores, mask=mask[None, :, :], axis=-1)
        gammas.append(gamma)
        outs.append(ad.bmm(gamma, v))
    z = ad.concat(outs, axis=2)
    return (z, gammas) if return_weights else z


def tat_forward(e_seq: list, lstm: LstmParams, heads: AttentionHeads) -> Tensor:
    """LSTM unroll then causal attention; returns final-time rows, n x (heads * F')."""
    states = lstm_unroll(e_seq, lstm)
    n, f_dim = states[0].shape
    t_steps = len(states)
    stacked = ad.concat([s.reshape(n, 1, f_dim) for s in states], axis=1)
    z = batched_temporal_attention(stacked, heads, causal_mask(t_steps))
    return z[:, t_steps - 1]
