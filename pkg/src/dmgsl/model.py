"""Parameter bundle and the end-to-end forward pipeline.

One training step: activate the learned adjacency, merge edge-type views
per snapshot (hierarchical attention), integrate across snapshots (temporal
attention), augment, encode both views with the shared GCN over their
respective graph operators, project, and score with the contrastive loss.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .config import TrainConfig
from .contrast import (
    EncoderParams,
    ProjectorParams,
    edge_drop,
    feature_mask,
    gcn_encode,
    init_encoder,
    init_projector,
    ntxent_loss,
    project,
)
from .data import SnapshotSequence
from .graphops import fgp_adjacency, gcn_normalize, knn_sparsify, symmetrize
from .hat import HatParams, hat_forward, init_hat_params
from .rng import substream
from .tat import AttentionHeads, LstmParams, init_attention_heads, init_lstm_params, tat_forward

ENCODER_HIDDEN = 64
PROJECTOR_HIDDEN = 32


@dataclass
class ModelParams:
    theta: Tensor  # n x n free edge parameters
    hat: HatParams
    lstm: LstmParams
    heads: AttentionHeads
    encoder: EncoderParams
    projector: ProjectorParams

    def named(self) -> list[tuple[str, Tensor]]:
        return (
            [("theta", self.theta)]
            + self.hat.named()
            + self.lstm.named()
            + self.heads.named()
            + self.encoder.named()
            + self.projector.named()
        )

    def tensors(self) -> list[Tensor]:
        return [t for _, t in self.named()]

    def count(self) -> int:
        return int(sum(t.size for t in self.tensors()))


def init_model(seq: SnapshotSequence, cfg: TrainConfig) -> ModelParams:
    """Seeded parameter init; the learned graph starts near the expert slices."""
    rng = substream(cfg.seed, "init")
    n, d, n_types = seq.n_nodes, seq.feature_dim, seq.n_edge_types
    view_dim = d + n
    anchor_mean = np.clip(np.mean(seq.slices, axis=0), 1e-2, 1.0 - 1e-2)
    theta0 = np.log(anchor_mean / (1.0 - anchor_mean)) + 0.01 * rng.uniform(-1.0, 1.0, size=(n, n))
    theta = Tensor(theta0, requires_grad=True)
    hat = init_hat_params(n_types, view_dim, cfg.hat_hidden, rng)
    lstm = init_lstm_params(view_dim, rng)  # state width equals the view width
    heads = init_attention_heads(view_dim, cfg.head_dim, cfg.n_heads, rng)
    enc_in = cfg.n_heads * cfg.head_dim if cfg.use_tat else view_dim
    encoder = init_encoder(enc_in, cfg.encoder_dim, rng, hidden=ENCODER_HIDDEN)
    projector = init_projector(cfg.encoder_dim, cfg.projector_dim, rng, hidden=PROJECTOR_HIDDEN)
    return ModelParams(theta=theta, hat=hat, lstm=lstm, heads=heads, encoder=encoder, projector=projector)


def expected_param_count(cfg: TrainConfig, n: int, d: int, n_types: int) -> int:
    """Closed-form trainable parameter count for the given dimensions."""
    view = d + n
    total = n * n
    total += n_types * (cfg.hat_hidden * view + 2 * cfg.hat_hidden)
    total += 4 * (view * 2 * view + view)
    total += cfg.n_heads * 3 * view * cfg.head_dim
    enc_in = cfg.n_heads * cfg.head_dim if cfg.use_tat else view
    total += enc_in * ENCODER_HIDDEN + ENCODER_HIDDEN * cfg.encoder_dim
    total += cfg.encoder_dim * PROJECTOR_HIDDEN + PROJECTOR_HIDDEN
    total += PROJECTOR_HIDDEN * cfg.projector_dim + cfg.projector_dim
    return total


def encode_views(params: ModelParams, cfg: TrainConfig, features: list[np.ndarray], anchors: list[np.ndarray]):
    """Run hierarchical + temporal attention on both branches.

    Returns (e_anchor, e_learned, a_raw, a_post): final node embeddings per
    view, the activated learned adjacency, and its top-k sparsified form.
    With use_tat off, the final embeddings are the last snapshot's merged
    views; with use_hat off, merging is a uniform average.
    """
    a_raw = fgp_adjacency(params.theta)
    a_post = knn_sparsify(a_raw, cfg.k)
    seq_a, seq_l = [], []
    for x in features:
        e_a, e_l = hat_forward(
            x,
            anchors,
            a_raw,
            params.hat,
            uniform=not cfg.use_hat,
            node_average=cfg.hat_node_average,
        )
        seq_a.append(e_a)
        seq_l.append(e_l)
    if cfg.use_tat:
        e_a = tat_forward(seq_a, params.lstm, params.heads)
        e_l = tat_forward(seq_l, params.lstm, params.heads)
    else:
        e_a, e_l = seq_a[-1], seq_l[-1]
    # Center each view across nodes. The [0,1] features and the all-ones
    # recurrent init give every node a large shared positive component;
    # without centering all cosine similarities sit at ~1 and the
    # contrastive gradient dies at the uniform-softmax saddle. A linear
    # probe is blind to the shift (it folds into the bias).
    e_a = ad.sub(e_a, e_a.mean(axis=0, keepdims=True))
    e_l = ad.sub(e_l, e_l.mean(axis=0, keepdims=True))
    return e_a, e_l, a_raw, a_post


def training_loss(
    params: ModelParams,
    cfg: TrainConfig,
    features: list[np.ndarray],
    anchors: list[np.ndarray],
    aug_rng: np.random.Generator,
):
    """One augmented contrastive forward pass; returns (loss, a_post).

    Augmentation draws happen in a fixed order (anchor mask, learned mask,
    anchor edges, learned edges) so a run is a pure function of the seed.
    """
    e_a, e_l, _, a_post = encode_views(params, cfg, features, anchors)
    ea_bar = feature_mask(e_a, cfg.r_anchor, aug_rng)
    el_bar = feature_mask(e_l, cfg.r_learned, aug_rng)
    anchor_mean = Tensor(np.mean(anchors, axis=0))
    op_a = gcn_normalize(symmetrize(edge_drop(anchor_mean, cfg.r_edge, aug_rng)))
    op_l = gcn_normalize(symmetrize(edge_drop(a_post, cfg.r_edge, aug_rng)))
    h_a = gcn_encode(ea_bar, op_a, params.encoder)
    h_l = gcn_encode(el_bar, op_l, params.encoder)
    y_a = project(h_a, params.projector)
    y_l = project(h_l, params.projector)
    return ntxent_loss(y_a, y_l, cfg.temperature), a_post
