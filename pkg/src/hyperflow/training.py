"""Dual-contrastive self-supervised training."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import autodiff as ad
from .environments import MembershipNet, membership_objective, sample_non_adjacent
from .graph import Hypergraph
from .model import ModelParams, Operators, forward, representation
from .optim import make_optimizer
from .rng import stream
from .tasks import TaskHead

log = logging.getLogger(__name__)


class TrainingDiverged(FloatingPointError):
    def __init__(self, message: str, history: list[dict]):
        super().__init__(message)
        self.history = history


@dataclass
class PairBatch:
    positives: np.ndarray
    negatives: np.ndarray


@dataclass
class TrainConfig:
    m_p: float = 0.1
    m_n: float = 1.0
    neg_ratio: int = 10
    epochs: int = 200
    learning_rate: float = 0.01
    optimizer: str = "adam"
    seed: int = 0
    mode: str = "pluggable"
    task: str | None = None
    task_weight: float = 1.0
    resample_negatives: bool = True
    joint: bool = False
    snapshot_every: int = 0
    snapshot_kind: str = "full"

    def __post_init__(self):
        if not self.m_n > self.m_p >= 0:
            raise ValueError("margins must satisfy m_n > m_p >= 0")
        if self.neg_ratio < 1:
            raise ValueError("neg_ratio must be >= 1")
        if self.mode not in ("pluggable", "unpluggable"):
            raise ValueError(f"unknown mode {self.mode!r}")


def sample_pairs(g: Hypergraph, neg_ratio: int, seed=0) -> PairBatch:
    """All aligned pairs (u, u) plus neg_ratio*N ordered non-adjacent pairs."""
    if neg_ratio < 1:
        raise ValueError("neg_ratio must be >= 1")
    n = g.node_count
    rng = seed if isinstance(seed, np.random.Generator) else stream(seed, "train.neg")
    neg = sample_non_adjacent(n, set(g.pairwise_edges), neg_ratio * n, rng)
    if len(neg) == 0 and n > 0:
        raise ValueError("no valid negative pairs: the pairwise graph is complete")
    pos = np.repeat(np.arange(n, dtype=np.int64)[:, None], 2, axis=1)
    return PairBatch(pos, neg)


def dual_contrastive_loss(X, X_hat, batch: PairBatch, m_p: float = 0.1, m_n: float = 1.0):
    """Returns (loss, positive term, negative term) as tensors."""
    X = ad.as_tensor(X)
    X_hat = ad.as_tensor(X_hat)
    if X.shape != X_hat.shape:
        raise ValueError(f"shape mismatch: {X.shape} vs {X_hat.shape}")

    def sqdist(pairs):
        diff = ad.take_rows(X, pairs[:, 0]) - ad.take_rows(X_hat, pairs[:, 1])
        return ad.tsum(diff * diff, axis=1)

    pos = ad.Tensor(0.0)
    neg = ad.Tensor(0.0)
    if len(batch.positives):
        pos = ad.tsum(ad.relu(sqdist(batch.positives) - m_p))
    if len(batch.negatives):
        neg = ad.tsum(ad.relu(m_n - sqdist(batch.negatives)))
    return pos + neg, pos, neg


@dataclass
class Trainer:
    """Holds everything one training run needs; ``objective`` is re-evaluable."""

    g: Hypergraph
    ops: Operators
    params: ModelParams
    cfg: TrainConfig
    task: TaskHead | None = None
    membership: MembershipNet | None = None
    history: list[dict] = field(default_factory=list)
    snapshots: list[tuple[int, np.ndarray]] = field(default_factory=list)

    def trainable(self) -> list[ad.Tensor]:
        tensors = self.params.tensors()
        if self.cfg.joint and self.membership is not None:
            tensors += self.membership.parameters()
        return tensors

    def batch(self, epoch: int) -> PairBatch:
        idx = epoch if self.cfg.resample_negatives else 0
        return sample_pairs(self.g, self.cfg.neg_ratio, stream(self.cfg.seed, "train.neg", idx))

    def objective(self, batch: PairBatch, epoch: int = 0):
        out = forward(self.g.features, self.ops, self.params)
        loss, pos, neg = dual_contrastive_loss(self.g.features, out["X_hat"], batch,
                                               self.cfg.m_p, self.cfg.m_n)
        terms = {"pos_term": pos, "neg_term": neg}
        if self.task is not None and self.cfg.mode == "unpluggable":
            t = self.task.loss(out["R_encode"], epoch)
            terms["task_term"] = t
            loss = loss + self.cfg.task_weight * t
        if self.cfg.joint and self.membership is not None:
            pos_e, neg_e = self._env_pairs(epoch)
            e = membership_objective(self.membership(self.g.features), pos_e, neg_e)
            terms["env_term"] = e
            loss = loss + e
        return loss, terms, out

    def _env_pairs(self, epoch: int):
        cache = self.__dict__.setdefault("_env_cache", {})
        if epoch not in cache:
            pos_e = np.array(self.g.pairwise_edges, dtype=np.int64)
            neg_e = sample_non_adjacent(self.g.node_count, set(self.g.pairwise_edges),
                                        5 * len(pos_e), stream(self.cfg.seed, "train.env", epoch))
            cache.clear()
            cache[epoch] = (pos_e, neg_e)
        return cache[epoch]

    def fit(self, epochs: int | None = None) -> list[dict]:
        epochs = self.cfg.epochs if epochs is None else epochs
        opt = make_optimizer(self.cfg.optimizer, self.trainable(), self.cfg.learning_rate)
        start = len(self.history)
        for epoch in range(start, start + epochs):
            if self.cfg.snapshot_every and epoch % self.cfg.snapshot_every == 0:
                self.snapshots.append((epoch, self.embeddings()))
            opt.zero_grad()
            loss, terms, _ = self.objective(self.batch(epoch), epoch)
            row = {"epoch": epoch + 1, "loss": float(loss.data),
                   **{k: float(v.data) for k, v in terms.items()}}
            self.history.append(row)
            if not np.isfinite(row["loss"]):
                raise TrainingDiverged(f"loss became non-finite at epoch {epoch + 1}",
                                       self.history)
            loss.backward()
            for p in opt.params:
                if p.grad is not None and not np.all(np.isfinite(p.grad)):
                    raise TrainingDiverged(f"non-finite gradient in {p.name}", self.history)
            opt.step()
        if self.cfg.snapshot_every:
            self.snapshots.append((start + epochs, self.embeddings()))
        return self.history

    def embeddings(self, kind: str | None = None) -> np.ndarray:
        out = forward(self.g.features, self.ops, self.params)
        return representation(out, kind or self.cfg.snapshot_kind)


def gradients(trainer: Trainer, batch: PairBatch, epoch: int = 0) -> dict[str, np.ndarray]:
    """d(loss)/d(param) for every trainable tensor, keyed by tensor name."""
    tensors = trainer.trainable()
    for t in tensors:
        t.grad = None
    loss, _, _ = trainer.objective(batch, epoch)
    if not np.isfinite(loss.data):
        raise FloatingPointError("loss is not finite at the current parameters")
    loss.backward()
    out = {}
    for t in tensors:
        g = np.zeros_like(t.data) if t.grad is None else t.grad
        if not np.all(np.isfinite(g)):
            raise FloatingPointError(f"non-finite gradient in {t.name}")
        out[t.name] = g.copy()
    return out


def train(g: Hypergraph, ops: Operators, cfg: TrainConfig, params: ModelParams | None = None,
          model_cfg=None, membership: MembershipNet | None = None):
    """Self-supervised training; returns (params, loss history)."""
    from .model import ModelConfig
    params = params or ModelParams.init(g.feature_dim, model_cfg or ModelConfig(), cfg.seed, ops)
    trainer = Trainer(g, ops, params, cfg, membership=membership)
    trainer.fit()
    return params, trainer.history


def train_with_task(g: Hypergraph, ops: Operators, cfg: TrainConfig, task_data: dict,
                    params: ModelParams | None = None, model_cfg=None):
    """Joint training of the contrastive loss plus a weighted task loss."""
    from .model import ModelConfig
    if cfg.task is None:
        raise ValueError("unpluggable training needs cfg.task")
    head = TaskHead(cfg.task, task_data, g.node_count, seed=cfg.seed)
    cfg = TrainConfig(**{**cfg.__dict__, "mode": "unpluggable"})
    params = params or ModelParams.init(g.feature_dim, model_cfg or ModelConfig(), cfg.seed, ops)
    trainer = Trainer(g, ops, params, cfg, task=head)
    trainer.fit()
    metrics = head.evaluate(trainer.embeddings("encode"))
    metrics["final_loss"] = trainer.history[-1]["loss"] if trainer.history else float("nan")
    return params, metrics, trainer.history


@dataclass
class GradCheckResult:
    max_rel_error: float
    checked: int
    skipped_kinks: int
    worst: str


def check_gradients(loss_fn: Callable[[], ad.Tensor], tensors: list[ad.Tensor],
                    eps: float = 1e-5, floor: float = 1e-6) -> GradCheckResult:
    """Compare backprop gradients with central differences, entry by entry.

    Relative error is |a - n| / max(|a|, |n|, floor). Entries whose +-eps probe
    flips any rectifier/clamp mask are skipped: the loss is not
    differentiable across that step and differences are meaningless there.
    """
    for t in tensors:
        t.grad = None
    with ad.record_kinks() as rec:
        loss = loss_fn()
    base_sig = rec.signature()
    loss.backward()
    analytic = [np.zeros_like(t.data) if t.grad is None else t.grad.copy() for t in tensors]
    worst, worst_name, checked, skipped = 0.0, "", 0, 0
    for t, a in zip(tensors, analytic):
        flat = t.data.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            vals, sigs = [], []
            for step in (eps, -eps):
                flat[i] = orig + step
                with ad.record_kinks() as r:
                    vals.append(float(loss_fn().data))
                sigs.append(r.signature())
            flat[i] = orig
            if sigs[0] != base_sig or sigs[1] != base_sig:
                skipped += 1
                continue
            num = (vals[0] - vals[1]) / (2 * eps)
            ana = a.reshape(-1)[i]
            rel = abs(ana - num) / max(abs(ana), abs(num), floor)
            checked += 1
            if rel > worst:
                worst, worst_name = rel, f"{t.name}[{i}]"
    return GradCheckResult(worst, checked, skipped, worst_name)
