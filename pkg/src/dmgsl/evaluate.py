"""Node-classification evaluation, metrics, and heatmap export.

Embedding quality is measured with a linear probe: a multinomial logistic
classifier trained on frozen embeddings over a stratified 6:2:2 split.
Precision/recall/F1 use support-weighted averaging, which makes weighted
recall coincide with accuracy. Metrics aggregate as mean +/- std over seeds.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .autodiff import Tape, Tensor
from .errors import DataError
from .graphops import write_adjacency_csv
from .optim import Adam
from .rng import substream


@dataclass
class SplitSpec:
    assignment: np.ndarray  # 0 train, 1 val, 2 test
    ratios: tuple[float, float, float]
    seed: int

    @property
    def train_idx(self) -> np.ndarray:
        return np.flatnonzero(self.assignment == 0)

    @property
    def val_idx(self) -> np.ndarray:
        return np.flatnonzero(self.assignment == 1)

    @property
    def test_idx(self) -> np.ndarray:
        return np.flatnonzero(self.assignment == 2)


@dataclass
class ProbeConfig:
    lr: float = 1e-2
    epochs: int = 300
    seed: int = 0


@dataclass
class MetricsReport:
    accuracy: float
    precision: float
    recall: float
    f1: float
    averaging: str = "weighted"

    def as_dict(self) -> dict[str, float]:
        return {
            "accuracy": self.accuracy,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
        }


def stratified_split(labels, ratios=(0.6, 0.2, 0.2), seed: int = 0, n_classes: int | None = None) -> SplitSpec:
    """Per-class largest-remainder allocation; every class sends >= 1 train node."""
    labels = np.asarray(labels, dtype=np.int64)
    if n_classes is None:
        n_classes = int(labels.max()) + 1
    rng = substream(seed, "split")
    ratios = tuple(float(r) for r in ratios)
    assignment = np.full(labels.shape[0], -1, dtype=np.int64)
    for c in range(n_classes):
        members = np.flatnonzero(labels == c)
        if members.size == 0:
            raise DataError(f"class {c} has no members")
        perm = rng.permutation(members)
        exact = members.size * np.asarray(ratios)
        counts = np.floor(exact).astype(np.int64)
        frac = exact - counts
        # distribute the remainder by largest fraction, ties to the earlier split
        for pick in np.argsort(-frac, kind="stable")[: members.size - counts.sum()]:
            counts[pick] += 1
        if counts[0] == 0:
            counts[int(np.argmax(counts[1:])) + 1] -= 1
            counts[0] = 1
        bounds = np.cumsum(counts)
        assignment[perm[: bounds[0]]] = 0
        assignment[perm[bounds[0] : bounds[1]]] = 1
        assignment[perm[bounds[1] : bounds[2]]] = 2
    return SplitSpec(assignment=assignment, ratios=ratios, seed=seed)


def linear_probe(embeddings, labels, split: SplitSpec, cfg: ProbeConfig | None = None) -> np.ndarray:
    """Train a softmax classifier on the train split, early-stop on val accuracy.

    Returns predicted classes for the test nodes (ties resolve to the lower
    class id via argmax).
    """
    cfg = cfg or ProbeConfig()
    embeddings = np.asarray(embeddings, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if embeddings.shape[0] != labels.shape[0]:
        raise DataError(f"{embeddings.shape[0]} embedding rows for {labels.shape[0]} labels")
    tr, va, te = split.train_idx, split.val_idx, split.test_idx
    if np.unique(labels[tr]).size < 2:
        raise DataError("degenerate split: train set holds a single class")
    n_classes = int(labels.max()) + 1
    dim = embeddings.shape[1]
    rng = substream(cfg.seed, "probe-init")
    w = Tensor(rng.uniform(-np.sqrt(1.0 / dim), np.sqrt(1.0 / dim), size=(dim, n_classes)), requires_grad=True)
    b = Tensor(np.zeros(n_classes), requires_grad=True)
    x_train = Tensor(embeddings[tr])
    onehot = np.eye(n_classes)[labels[tr]]
    opt = Adam([w, b], cfg.lr)
    best_acc, best_w, best_b = -1.0, w.data.copy(), b.data.copy()
    for _ in range(cfg.epochs):
        with Tape() as tape:
            logits = ad.add(ad.matmul(x_train, w), b)
            shift = logits.data.max(axis=1, keepdims=True)  # constant, keeps exp in range
            lse = ad.add(ad.log(ad.exp(ad.sub(logits, shift)).sum(axis=1, keepdims=True)), shift)
            picked = ad.mul(logits, onehot).sum(axis=1, keepdims=True)
            loss = ad.mul(ad.sub(lse, picked).sum(), 1.0 / tr.size)
        tape.backward(loss, [w, b])
        opt.step()
        if va.size:
            val_pred = np.argmax(embeddings[va] @ w.data + b.data, axis=1)
            acc = float(np.mean(val_pred == labels[va]))
            if acc > best_acc:
                best_acc, best_w, best_b = acc, w.data.copy(), b.data.copy()
    if va.size == 0:
        best_w, best_b = w.data, b.data
    return np.argmax(embeddings[te] @ best_w + best_b, axis=1)


def gcn_probe(features, adjacency, labels, split: SplitSpec, cfg: ProbeConfig | None = None) -> np.ndarray:
    """Alternative probe: a supervised two-layer GCN over the learned structure.

    Trains on raw (snapshot-mean) node features and the exported adjacency
    rather than frozen embeddings; selected with --probe gcn on the CLI.
    """
    from .graphops import gcn_normalize, symmetrize  # local import avoids a cycle

    cfg = cfg or ProbeConfig()
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    tr, va, te = split.train_idx, split.val_idx, split.test_idx
    if np.unique(labels[tr]).size < 2:
        raise DataError("degenerate split: train set holds a single class")
    n_classes = int(labels.max()) + 1
    dim, hidden = features.shape[1], 32
    a_hat = gcn_normalize(symmetrize(adjacency)).data
    rng = substream(cfg.seed, "probe-gcn-init")
    w1 = Tensor(rng.uniform(-np.sqrt(1.0 / dim), np.sqrt(1.0 / dim), size=(dim, hidden)), requires_grad=True)
    w2 = Tensor(rng.uniform(-np.sqrt(1.0 / hidden), np.sqrt(1.0 / hidden), size=(hidden, n_classes)), requires_grad=True)
    x = Tensor(features)
    onehot = np.eye(n_classes)[labels[tr]]
    opt = Adam([w1, w2], cfg.lr)
    best_acc, best = -1.0, (w1.data.copy(), w2.data.copy())

    def forward(w1_data, w2_data):
        h = np.maximum(a_hat @ features @ w1_data, 0.0)
        return a_hat @ h @ w2_data

    for _ in range(cfg.epochs):
        with Tape() as tape:
            hidden_t = ad.relu(ad.matmul(ad.matmul(Tensor(a_hat), x), w1))
            logits = ad.matmul(ad.matmul(Tensor(a_hat), hidden_t), w2)
            logits_tr = logits[tr.tolist(), :]
            shift = logits_tr.data.max(axis=1, keepdims=True)
            lse = ad.add(ad.log(ad.exp(ad.sub(logits_tr, shift)).sum(axis=1, keepdims=True)), shift)
            picked = ad.mul(logits_tr, onehot).sum(axis=1, keepdims=True)
            loss = ad.mul(ad.sub(lse, picked).sum(), 1.0 / tr.size)
        tape.backward(loss, [w1, w2])
        opt.step()
        if va.size:
            acc = float(np.mean(np.argmax(forward(w1.data, w2.data)[va], axis=1) == labels[va]))
            if acc > best_acc:
                best_acc, best = acc, (w1.data.copy(), w2.data.copy())
    if va.size == 0:
        best = (w1.data, w2.data)
    return np.argmax(forward(*best)[te], axis=1)


def compute_metrics(y_true, y_pred, n_classes: int | None = None) -> MetricsReport:
    """Confusion-matrix metrics with support-weighted averaging.

    Classes never predicted get precision 0; weighted recall equals accuracy
    by construction.
    """
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.shape != y_pred.shape:
        raise DataError(f"length mismatch: {y_true.shape} vs {y_pred.shape}")
    if n_classes is None:
        n_classes = int(max(y_true.max(), y_pred.max())) + 1
    conf = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(conf, (y_true, y_pred), 1)
    tp = np.diag(conf).astype(np.float64)
    support = conf.sum(axis=1).astype(np.float64)
    predicted = conf.sum(axis=0).astype(np.float64)
    with np.errstate(invalid="ignore", divide="ignore"):
        precision_c = np.where(predicted > 0, tp / predicted, 0.0)
        recall_c = np.where(support > 0, tp / support, 0.0)
        denom = precision_c + recall_c
        f1_c = np.where(denom > 0, 2.0 * precision_c * recall_c / denom, 0.0)
    weights = support / support.sum()
    return MetricsReport(
        accuracy=float(tp.sum() / support.sum()),
        precision=float(np.sum(weights * precision_c)),
        recall=float(np.sum(weights * recall_c)),
        f1=float(np.sum(weights * f1_c)),
    )


def _aggregate_over_seeds(run_probe, labels, seeds) -> dict:
    labels = np.asarray(labels, dtype=np.int64)
    per_seed = []
    for s in seeds:
        split = stratified_split(labels, seed=int(s))
        preds = run_probe(split, int(s))
        per_seed.append(compute_metrics(labels[split.test_idx], preds, n_classes=int(labels.max()) + 1))
    out: dict = {"seeds": [int(s) for s in seeds], "stddevs": {}}
    for key in ("accuracy", "precision", "recall", "f1"):
        vals = np.asarray([getattr(m, key) for m in per_seed])
        out[key] = float(vals.mean())
        out["stddevs"][key] = float(vals.std())
    return out


def evaluate_embeddings(embeddings, labels, seeds=(0, 1, 2, 3, 4)) -> dict:
    """Linear probe over several split/probe seeds; mean and std per metric."""
    return _aggregate_over_seeds(
        lambda split, s: linear_probe(embeddings, labels, split, ProbeConfig(seed=s)), labels, seeds
    )


def evaluate_gcn(features, adjacency, labels, seeds=(0, 1, 2, 3, 4)) -> dict:
    """GCN probe on the exported structure over several seeds."""
    return _aggregate_over_seeds(
        lambda split, s: gcn_probe(features, adjacency, labels, split, ProbeConfig(seed=s)), labels, seeds
    )


def write_metrics_json(metrics: dict, path) -> None:
    with open(Path(path), "w") as f:
        json.dump(metrics, f, indent=2, sort_keys=True)
        f.write("\n")


def write_metrics_report(metrics: dict, path) -> None:
    lines = [f"node classification over seeds {metrics['seeds']}"]
    for key in ("accuracy", "precision", "recall", "f1"):
        lines.append(f"{key:<9s} {metrics[key]:.4f} +/- {metrics['stddevs'][key]:.4f}")
    Path(path).write_text("\n".join(lines) + "\n")


def export_heatmap(a, out_base) -> tuple[Path, Path]:
    """Write a [0,1] adjacency as dense CSV plus a grayscale PGM.

    Pixel value is round(255 * (1 - a_ij)): heavier edges render darker.
    """
    a = np.asarray(a, dtype=np.float64)
    if a.min() < 0.0 or a.max() > 1.0:
        raise DataError(f"adjacency entries outside [0, 1]: min {a.min()}, max {a.max()}")
    base = Path(out_base)
    csv_path = base.with_suffix(".csv")
    pgm_path = base.with_suffix(".pgm")
    write_adjacency_csv(a, csv_path)
    pixels = np.rint(255.0 * (1.0 - a)).astype(np.uint8)
    h, w = pixels.shape
    with open(pgm_path, "wb") as f:
        f.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        f.write(pixels.tobytes())
    return csv_path, pgm_path


def read_pgm(path) -> np.ndarray:
    """Read back a binary PGM written by export_heatmap."""
    raw = Path(path).read_bytes()
    parts = raw.split(b"\n", 3)
    if parts[0] != b"P5":
        raise DataError(f"{path}: not a binary PGM")
    w, h = (int(x) for x in parts[1].split())
    return np.frombuffer(parts[3], dtype=np.uint8, count=w * h).reshape(h, w)


def edge_recovery_precision(a, truth_pairs, n_nodes: int | None = None) -> tuple[float, float]:
    """Precision of the top-|truth| unordered pairs against planted edges.

    Returns (precision, density_baseline); the baseline is what a random
    ranking would score in expectation.
    """
    a = np.asarray(a, dtype=np.float64)
    n = n_nodes or a.shape[0]
    truth = {(min(i, j), max(i, j)) for i, j in truth_pairs}
    sym = (a + a.T) / 2.0
    iu, ju = np.triu_indices(n, k=1)
    scores = sym[iu, ju]
    order = np.lexsort((ju, iu, -scores))  # score desc, then lowest (i, j)
    top = order[: len(truth)]
    hits = sum((int(iu[o]), int(ju[o])) in truth for o in top)
    precision = hits / len(truth)
    baseline = len(truth) / (n * (n - 1) / 2.0)
    return precision, baseline
