"""Contrastive head: augmentation, shared GCN encoder, projector, loss, bootstrap.

Both views are augmented (feature masking on the node embeddings, edge
dropping on the graph operators), encoded by one shared two-layer GCN,
projected by one shared two-layer MLP, and scored with a symmetric
normalized temperature-scaled cross-entropy over cosine similarities. The
anchor adjacency drifts toward the learned one through a slow convex
update with no gradient flow.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor, as_tensor
from .errors import ConfigError, NumericError, ShapeError


@dataclass
class EncoderParams:
    w1: Tensor  # in x hidden
    w2: Tensor  # hidden x d1

    def named(self, prefix: str = "encoder") -> list[tuple[str, Tensor]]:
        return [(f"{prefix}.w1", self.w1), (f"{prefix}.w2", self.w2)]


@dataclass
class ProjectorParams:
    w1: Tensor  # d1 x hidden
    b1: Tensor
    w2: Tensor  # hidden x d2
    b2: Tensor

    def named(self, prefix: str = "projector") -> list[tuple[str, Tensor]]:
        return [
            (f"{prefix}.w1", self.w1),
            (f"{prefix}.b1", self.b1),
            (f"{prefix}.w2", self.w2),
            (f"{prefix}.b2", self.b2),
        ]


def init_encoder(in_dim: int, out_dim: int, rng: np.random.Generator, hidden: int = 64) -> EncoderParams:
    b1 = np.sqrt(1.0 / in_dim)
    b2 = np.sqrt(1.0 / hidden)
    return EncoderParams(
        w1=Tensor(rng.uniform(-b1, b1, size=(in_dim, hidden)), requires_grad=True),
        w2=Tensor(rng.uniform(-b2, b2, size=(hidden, out_dim)), requires_grad=True),
    )


def init_projector(in_dim: int, out_dim: int, rng: np.random.Generator, hidden: int = 32) -> ProjectorParams:
    b1 = np.sqrt(1.0 / in_dim)
    b2 = np.sqrt(1.0 / hidden)
    return ProjectorParams(
        w1=Tensor(rng.uniform(-b1, b1, size=(in_dim, hidden)), requires_grad=True),
        b1=Tensor(np.zeros(hidden), requires_grad=True),
        w2=Tensor(rng.uniform(-b2, b2, size=(hidden, out_dim)), requires_grad=True),
        b2=Tensor(np.zeros(out_dim), requires_grad=True),
    )


def feature_mask(e, rate: float, rng: np.random.Generator) -> Tensor:
    """Zero whole feature columns, one Bernoulli(1-rate) draw per column."""
    if not 0.0 <= rate <= 1.0:
        raise ConfigError(f"feature_mask: rate {rate} outside [0, 1]")
    e = as_tensor(e)
    keep = (rng.random(e.shape[1]) >= rate).astype(np.float64)
    return ad.mul(e, keep)


def edge_drop(a, rate: float, rng: np.random.Generator) -> Tensor:
    """Independently zero entries with probability rate (zeros stay zero)."""
    if not 0.0 <= rate <= 1.0:
        raise ConfigError(f"edge_drop: rate {rate} outside [0, 1]")
    a = as_tensor(a)
    keep = (rng.random(a.shape) >= rate).astype(np.float64)
    return ad.mul(a, keep)


def gcn_encode(features, a_hat, params: EncoderParams) -> Tensor:
    """Two-layer graph convolution: A (relu(A X W1)) W2."""
    features, a_hat = as_tensor(features), as_tensor(a_hat)
    h = ad.relu(ad.matmul(ad.matmul(a_hat, features), params.w1))
    return ad.matmul(ad.matmul(a_hat, h), params.w2)


def project(h, params: ProjectorParams) -> Tensor:
    """Two affine layers with a ReLU between."""
    h = as_tensor(h)
    mid = ad.relu(ad.add(ad.matmul(h, params.w1), params.b1))
    return ad.add(ad.matmul(mid, params.w2), params.b2)


def ntxent_loss(y_a, y_l, temperature: float) -> Tensor:
    """Symmetric InfoNCE over cosine similarities of row pairs.

    Row i of one view is the positive for row i of the other; all other rows
    of the opposite view are negatives. Averaged over both directions.
    """
    if temperature <= 0:
        raise ConfigError(f"ntxent_loss: temperature {temperature} must be > 0")
    y_a, y_l = as_tensor(y_a), as_tensor(y_l)
    if y_a.shape != y_l.shape or y_a.ndim != 2:
        raise ShapeError(f"ntxent_loss: views must share a 2-d shape, got {y_a.shape} and {y_l.shape}")
    n = y_a.shape[0]
    for name, y in (("anchor", y_a), ("learned", y_l)):
        norms = np.linalg.norm(y.data, axis=1)
        if np.any(norms == 0.0):
            node = int(np.argmin(norms))
            raise NumericError(f"ntxent_loss: zero row {node} in {name} view, cosine undefined")
    inv_a = ad.power(ad.mul(y_a, y_a).sum(axis=1, keepdims=True), -0.5)
    inv_l = ad.power(ad.mul(y_l, y_l).sum(axis=1, keepdims=True), -0.5)
    za = ad.mul(y_a, inv_a)
    zl = ad.mul(y_l, inv_l)
    logits = ad.mul(ad.matmul(za, ad.transpose(zl)), 1.0 / temperature)
    eye = np.eye(n)
    p_fwd = ad.softmax(logits, axis=1)  # row i: anchor i against all learned rows
    p_bwd = ad.softmax(ad.transpose(logits), axis=1)  # row i: learned i against all anchor rows
    pos_fwd = ad.mul(p_fwd, eye).sum(axis=1)
    pos_bwd = ad.mul(p_bwd, eye).sum(axis=1)
    total = ad.add(ad.log(pos_fwd).sum(), ad.log(pos_bwd).sum())
    return ad.mul(total, -1.0 / (2.0 * n))


def bootstrap_update(anchor_slices: list[np.ndarray], learned: np.ndarray, tau: float) -> list[np.ndarray]:
    """Slow convex pull of every anchor slice toward the learned adjacency.

    Pure array update: no gradient flows through it. With entries of both
    sides in [0, 1] the result stays in [0, 1].
    """
    if not 0.0 <= tau <= 1.0:
        raise ConfigError(f"bootstrap_update: tau {tau} outside [0, 1]")
    learned = learned.data if isinstance(learned, Tensor) else np.asarray(learned, dtype=np.float64)
    out = []
    for s, a in enumerate(anchor_slices):
        if a.shape != learned.shape:
            raise ShapeError(f"bootstrap_update: slice {s} shape {a.shape} != learned {learned.shape}")
        out.append(tau * a + (1.0 - tau) * learned)
    return out
