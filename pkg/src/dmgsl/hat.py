"""Hierarchical (edge-level) attention.

Each edge type yields one view of the graph: node features concatenated
with that type's adjacency rows. A shared per-level transform scores every
view, a softmax across edge types turns the scores into per-node mixing
weights, and the views collapse into a single matrix per branch (anchor and
learned). Anchor and learned views at the same level share parameters; the
learned branch places the same activated parameter adjacency in every slot.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor, as_tensor
from .errors import ContractError, ShapeError
from .graphops import concat_view


@dataclass
class HatLevel:
    w: Tensor  # hidden x (d + n)
    b: Tensor  # hidden
    q: Tensor  # hidden


@dataclass
class HatParams:
    levels: list[HatLevel]

    @property
    def n_levels(self) -> int:
        return len(self.levels)

    def named(self, prefix: str = "hat") -> list[tuple[str, Tensor]]:
        out = []
        for s, lvl in enumerate(self.levels):
            out += [(f"{prefix}.{s}.w", lvl.w), (f"{prefix}.{s}.b", lvl.b), (f"{prefix}.{s}.q", lvl.q)]
        return out


def init_hat_params(n_levels: int, in_dim: int, hidden: int, rng: np.random.Generator) -> HatParams:
    levels = []
    bound_w = np.sqrt(1.0 / in_dim)
    bound_q = np.sqrt(1.0 / hidden)
    for _ in range(n_levels):
        w = Tensor(rng.uniform(-bound_w, bound_w, size=(hidden, in_dim)), requires_grad=True)
        b = Tensor(np.zeros(hidden), requires_grad=True)
        q = Tensor(rng.uniform(-bound_q, bound_q, size=hidden), requires_grad=True)
        levels.append(HatLevel(w=w, b=b, q=q))
    return HatParams(levels=levels)


def _level_scores(view: Tensor, level: HatLevel) -> Tensor:
    """Attention score per node row: q . tanh(W e + b), vectorized over rows."""
    hidden = ad.tanh(ad.add(ad.matmul(view, ad.transpose(level.w)), level.b))
    return ad.matmul(hidden, level.q.reshape(level.q.shape[0], 1))  # n x 1


def edge_attention(e_views: list[Tensor], params: HatParams) -> Tensor:
    """Mixing weights over edge types for one node's view vectors."""
    if len(e_views) != params.n_levels:
        raise ShapeError(f"edge_attention: {len(e_views)} views for {params.n_levels} levels")
    scores = []
    for view, level in zip(e_views, params.levels):
        v = as_tensor(view)
        col = v.reshape(v.shape[0], 1)
        h = ad.tanh(ad.add(ad.matmul(level.w, col), level.b.reshape(level.b.shape[0], 1)))
        s = ad.matmul(level.q.reshape(1, level.q.shape[0]), h)  # 1 x 1
        scores.append(s.reshape(1))
    return ad.softmax(ad.concat(scores, axis=0), axis=-1)


def slice_attention(views: list[Tensor], params: HatParams, node_average: bool = False) -> Tensor:
    """Per-node mixing weights over edge types; rows sum to 1.

    Returns n x S (or 1 x S when scores are pooled over nodes).
    """
    if len(views) != params.n_levels:
        raise ShapeError(f"slice_attention: {len(views)} views for {params.n_levels} levels")
    cols = [_level_scores(as_tensor(v), lvl) for v, lvl in zip(views, params.levels)]
    if node_average:
        cols = [c.mean(axis=0, keepdims=True) for c in cols]
    return ad.softmax(ad.concat(cols, axis=1), axis=-1)


def merge_slices(e_views: list[Tensor], alpha: Tensor) -> Tensor:
    """Convex combination of the views with the attention weights."""
    alpha = as_tensor(alpha)
    if alpha.shape != (len(e_views),):
        raise ShapeError(f"merge_slices: alpha shape {alpha.shape} for {len(e_views)} views")
    if abs(float(alpha.data.sum()) - 1.0) > 1e-9:
        raise ContractError(f"merge_slices: weights sum to {alpha.data.sum()!r}, not 1")
    merged = None
    for s, view in enumerate(e_views):
        term = ad.mul(as_tensor(view), alpha[s])
        merged = term if merged is None else ad.add(merged, term)
    return merged


def hat_forward(
    x,
    anchor_slices,
    learned_adj,
    params: HatParams,
    uniform: bool = False,
    node_average: bool = False,
) -> tuple[Tensor, Tensor]:
    """Merge anchor and learned views of one snapshot.

    Returns (E_a, E_l), each n x (d + n). With `uniform` the attention is
    bypassed and views average with weight 1/S (the no-attention ablation);
    `node_average` pools the scores over nodes so all rows share one weight
    vector.
    """
    x = as_tensor(x)
    n_levels = params.n_levels
    if len(anchor_slices) != n_levels:
        raise ShapeError(f"hat_forward: {len(anchor_slices)} slices for {n_levels} levels")
    anchor_views = [concat_view(x, as_tensor(a)) for a in anchor_slices]
    learned = as_tensor(learned_adj)
    learned_views = [concat_view(x, learned) for _ in range(n_levels)]

    def merge(views):
        if uniform:
            out = views[0]
            for v in views[1:]:
                out = ad.add(out, v)
            return ad.mul(out, 1.0 / n_levels)
        alpha = slice_attention(views, params, node_average=node_average)  # n x S (or 1 x S)
        out = None
        for s, v in enumerate(views):
            term = ad.mul(v, alpha[:, s : s + 1])
            out = term if out is None else ad.add(out, term)
        return out

    return merge(anchor_views), merge(learned_views)
