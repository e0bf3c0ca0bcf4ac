"""Closed-set identification metrics: Rank-k accuracy and CMC curves."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import ContractError


def true_label_ranks(logits, labels) -> np.ndarray:
    """0-based rank of each row's true class.

    A class outranks the true one if its score is higher, or equal with a lower
    class index.
    """
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if logits.ndim != 2 or labels.shape != (logits.shape[0],):
        raise ContractError(f"need logits [n, K] and labels [n], got {logits.shape} and {labels.shape}")
    n_classes = logits.shape[1]
    if labels.size and (labels.min() < 0 or labels.max() >= n_classes):
        raise ContractError(f"labels must lie in [0, {n_classes})")
    truth = logits[np.arange(len(labels)), labels][:, None]
    lower_index = np.arange(n_classes)[None, :] < labels[:, None]
    return ((logits > truth) | ((logits == truth) & lower_index)).sum(axis=1)


def rank_k_accuracy(logits, labels, k: int) -> float:
    n_classes = np.shape(logits)[-1]
    if not 1 <= k <= n_classes:
        raise ContractError(f"k must lie in [1, {n_classes}], got {k}")
    ranks = true_label_ranks(logits, labels)
    if ranks.size == 0:
        raise ContractError("no samples to score")
    return float(np.mean(ranks < k))


@dataclass(frozen=True)
class CmcCurve:
    accuracies: np.ndarray  # index r-1 holds Rank-r accuracy
    n_samples: int

    def __post_init__(self):
        a = self.accuracies
        if np.any(np.diff(a) < 0) or a[-1] != 1.0 or a.min() < 0.0:
            raise ContractError("CMC curve must be nondecreasing, within [0, 1] and end at 1")

    def rank(self, k: int) -> float:
        return float(self.accuracies[k - 1])

    @property
    def ranks(self) -> np.ndarray:
        return np.arange(1, len(self.accuracies) + 1)


def cmc_curve(logits, labels) -> CmcCurve:
    ranks = true_label_ranks(logits, labels)
    if ranks.size == 0:
        raise ContractError("no samples to score")
    n_classes = np.shape(logits)[1]
    counts = np.bincount(ranks, minlength=n_classes)
    return CmcCurve(np.cumsum(counts) / ranks.size, int(ranks.size))


def write_cmc_csv(path, curve: CmcCurve) -> None:
    with open(path, "w", newline="") as f:
        out = csv.writer(f)
        out.writerow(["rank", "accuracy"])
        for r, a in zip(curve.ranks, curve.accuracies):
            out.writerow([int(r), repr(float(a))])


def plot_cmc(path, curves: dict[str, CmcCurve]) -> None:
    """Render one or more CMC curves to an SVG file."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(5, 4))
    for label, curve in curves.items():
        ax.plot(curve.ranks, 100 * curve.accuracies, marker="o", markersize=3, label=label)
    ax.set_xlabel("Rank")
    ax.set_ylabel("Identification accuracy (%)")
    ax.set_ylim(0, 101)
    ax.grid(alpha=0.3)
    ax.legend(loc="lower right")
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
