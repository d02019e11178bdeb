"""Matplotlib figure rendering for run artifacts.

Figures are written next to their delimited counterparts: a loss curve PNG
beside loss.csv, a heatmap PNG beside the adjacency CSV/PGM, and a grouped
bar chart beside the ablation table.
"""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

METRIC_KEYS = ("accuracy", "precision", "recall", "f1")


def save_loss_curve(trace, path, title: str = "contrastive loss") -> Path:
    path = Path(path)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(np.arange(1, len(trace) + 1), trace, lw=1.2)
    ax.set_xlabel("epoch")
    ax.set_ylabel("loss")
    ax.set_title(title)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def save_heatmap_figure(a, path, title: str = "adjacency") -> Path:
    path = Path(path)
    fig, ax = plt.subplots(figsize=(5.5, 5))
    im = ax.imshow(np.asarray(a, dtype=float), cmap="gray_r", vmin=0.0, vmax=1.0, interpolation="nearest")
    ax.set_xlabel("node")
    ax.set_ylabel("node")
    ax.set_title(title)
    fig.colorbar(im, ax=ax, fraction=0.046)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def save_ablation_figure(rows: list[dict], path) -> Path:
    path = Path(path)
    names = [r["name"] for r in rows]
    x = np.arange(len(METRIC_KEYS))
    width = 0.8 / len(rows)
    fig, ax = plt.subplots(figsize=(7, 4))
    for i, row in enumerate(rows):
        vals = [row[k] for k in METRIC_KEYS]
        ax.bar(x + (i - (len(rows) - 1) / 2) * width, vals, width, label=names[i])
    ax.set_xticks(x)
    ax.set_xticklabels(METRIC_KEYS)
    ax.set_ylim(0, 1)
    ax.set_ylabel("score")
    ax.set_title("model configurations")
    ax.legend(fontsize=8)
    ax.grid(axis="y", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
