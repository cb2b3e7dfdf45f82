"""Downstream task heads and their evaluation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.metrics import average_precision_score, roc_auc_score

from . import autodiff as ad
from .environments import sample_non_adjacent
from .graph import canonical_edges
from .rng import stream

TASKS = ("link_prediction", "rating_regression")


@dataclass
class EdgeSplit:
    train: tuple[tuple[int, int], ...]
    test_pos: np.ndarray
    test_neg: np.ndarray


def split_edges(edges, node_count: int, test_fraction: float = 0.2, neg_per_pos: int = 10,
                seed: int = 0) -> EdgeSplit:
    """Hold out a fraction of edges and draw negatives from non-edges of the full graph."""
    edges = np.array(canonical_edges(edges), dtype=np.int64)
    rng = stream(seed, "task.split")
    order = rng.permutation(len(edges))
    n_test = max(1, int(round(test_fraction * len(edges))))
    test = edges[order[:n_test]]
    train = edges[order[n_test:]]
    neg = sample_non_adjacent(node_count, {tuple(e) for e in edges.tolist()},
                              n_test * neg_per_pos, stream(seed, "task.split.neg"))
    return EdgeSplit(tuple(map(tuple, train.tolist())), test, neg)


def pair_scores(emb: np.ndarray, pairs: np.ndarray) -> np.ndarray:
    pairs = np.asarray(pairs, dtype=np.int64)
    return np.einsum("ij,ij->i", emb[pairs[:, 0]], emb[pairs[:, 1]])


def link_auc(emb: np.ndarray, pos: np.ndarray, neg: np.ndarray) -> dict[str, float]:
    scores = np.concatenate([pair_scores(emb, pos), pair_scores(emb, neg)])
    labels = np.concatenate([np.ones(len(pos)), np.zeros(len(neg))])
    return {"auc": float(roc_auc_score(labels, scores)),
            "ap": float(average_precision_score(labels, scores))}


def scale_scores(scores, lo: float | None = None, hi: float | None = None) -> np.ndarray:
    scores = np.asarray(scores, dtype=np.float64)
    lo = scores.min() if lo is None else lo
    hi = scores.max() if hi is None else hi
    if hi <= lo:
        return np.zeros_like(scores)
    return np.clip((scores - lo) / (hi - lo), 0.0, 1.0)


def _dot_pairs(R: ad.Tensor, pairs: np.ndarray) -> ad.Tensor:
    return ad.tsum(ad.take_rows(R, pairs[:, 0]) * ad.take_rows(R, pairs[:, 1]), axis=1)


def link_loss(R: ad.Tensor, pos: np.ndarray, neg: np.ndarray) -> ad.Tensor:
    """Logistic loss on endpoint inner products."""
    loss = ad.mean(ad.softplus(-_dot_pairs(R, pos)))
    if len(neg):
        loss = loss + ad.mean(ad.softplus(_dot_pairs(R, neg)))
    return loss


def rating_loss(R: ad.Tensor, pairs: np.ndarray, targets: np.ndarray) -> ad.Tensor:
    """Mean absolute error of sigmoid(<r_u, r_v>) against scores in [0, 1]."""
    pred = ad.sigmoid(_dot_pairs(R, pairs))
    return ad.mean(ad.absolute(pred - targets))


class TaskHead:
    """Produces the per-epoch task loss for joint training."""

    def __init__(self, task: str, data: dict, node_count: int, seed: int = 0):
        if task not in TASKS:
            raise ValueError(f"unknown task {task!r}; choose from {TASKS}")
        self.task = task
        self.data = data
        self.n = node_count
        self.seed = seed
        if task == "link_prediction":
            self.pos = np.array(canonical_edges(data["train"]), dtype=np.int64)
            self.edge_set = set(map(tuple, self.pos.tolist()))
            self.neg_ratio = int(data.get("neg_ratio", 1))
        else:
            self.pairs = np.asarray(data["pairs"], dtype=np.int64)
            self.targets = np.asarray(data["targets"], dtype=np.float64)
            if self.targets.min() < 0 or self.targets.max() > 1:
                raise ValueError("rating targets must be scaled to [0, 1]")

    def loss(self, R: ad.Tensor, epoch: int) -> ad.Tensor:
        if self.task == "link_prediction":
            neg = sample_non_adjacent(self.n, self.edge_set, self.neg_ratio * len(self.pos),
                                      stream(self.seed, "task.neg", epoch))
            return link_loss(R, self.pos, neg)
        return rating_loss(R, self.pairs, self.targets)

    def evaluate(self, R: np.ndarray) -> dict[str, float]:
        if self.task == "link_prediction":
            if "test_pos" not in self.data:
                return {}
            return link_auc(R, self.data["test_pos"], self.data["test_neg"])
        pred = 1.0 / (1.0 + np.exp(-pair_scores(R, self.pairs)))
        return {"mae": float(np.mean(np.abs(pred - self.targets)))}
