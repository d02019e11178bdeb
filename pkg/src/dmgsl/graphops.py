"""Adjacency construction and post-processing.

The learned graph starts as an unconstrained square parameter matrix; a
sigmoid maps it into [0,1], top-k sparsification keeps the strongest
candidate edges per row, and symmetrization + renormalization produce the
operator the GCN encoder consumes.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor, as_tensor
from .errors import ConfigError, ShapeError


def fgp_adjacency(theta) -> Tensor:
    """Activate the full-graph parameter matrix into a [0,1] adjacency."""
    theta = as_tensor(theta)
    if theta.ndim != 2 or theta.shape[0] != theta.shape[1]:
        raise ShapeError(f"fgp_adjacency: parameter matrix must be square, got {theta.shape}")
    return ad.sigmoid(theta)


def knn_mask(values: np.ndarray, k: int) -> np.ndarray:
    """0/1 mask keeping the k largest off-diagonal entries per row.

    Ties break toward the lower column index; the diagonal is always dropped.
    """
    n = values.shape[0]
    if not 1 <= k <= n - 1:
        raise ConfigError(f"knn_sparsify: k={k} out of range [1, {n - 1}]")
    scores = values.astype(np.float64).copy()
    np.fill_diagonal(scores, -np.inf)
    # stable argsort of -scores keeps lower column indices first among ties
    order = np.argsort(-scores, axis=1, kind="stable")[:, :k]
    mask = np.zeros_like(scores)
    np.put_along_axis(mask, order, 1.0, axis=1)
    return mask


def knn_sparsify(a, k: int) -> Tensor:
    """Keep the k strongest off-diagonal entries per row, zero the rest.

    The selection mask is computed from values and held constant during
    backward, so kept entries pass gradients through unchanged and dropped
    entries get none.
    """
    a = as_tensor(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ShapeError(f"knn_sparsify: adjacency must be square, got {a.shape}")
    return ad.mul(a, knn_mask(a.data, k))


def symmetrize(a) -> Tensor:
    a = as_tensor(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ShapeError(f"symmetrize: matrix must be square, got {a.shape}")
    return ad.mul(ad.add(a, ad.transpose(a)), 0.5)


def gcn_normalize(a) -> Tensor:
    """Degree-normalized operator D^{-1/2} (A + I) D^{-1/2} with self-loops."""
    a = as_tensor(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ShapeError(f"gcn_normalize: adjacency must be square, got {a.shape}")
    n = a.shape[0]
    a_tilde = ad.add(a, np.eye(n))
    deg = a_tilde.sum(axis=1, keepdims=True)  # >= 1 thanks to the self-loops
    d_inv_sqrt = ad.power(deg, -0.5)
    return ad.mul(ad.mul(a_tilde, d_inv_sqrt), ad.transpose(d_inv_sqrt))


def concat_view(x, a) -> Tensor:
    """Per-node feature rows extended with that node's adjacency row."""
    x, a = as_tensor(x), as_tensor(a)
    if x.shape[0] != a.shape[0]:
        raise ShapeError(f"concat_view: row counts differ, {x.shape} vs {a.shape}")
    return ad.concat([x, a], axis=1)


def write_adjacency_csv(a: np.ndarray, path) -> None:
    """Dense CSV, one row per node, 6 decimal places."""
    a = np.asarray(a, dtype=np.float64)
    np.savetxt(Path(path), a, fmt="%.6f", delimiter=",")


def read_adjacency_csv(path) -> np.ndarray:
    a = np.loadtxt(Path(path), delimiter=",", dtype=np.float64)
    return np.atleast_2d(a)
