"""Finite-difference verification of the full training objective."""

from __future__ import annotations

import itertools
import time

import numpy as np

from .environments import MembershipConfig, extract_hyperedges, fit_membership
from .graph import Hypergraph, build_incidence
from .linegraph import build_line_graph
from .model import ModelConfig, ModelParams, Operators
from .rng import stream
from .training import Trainer, TrainConfig, check_gradients


def random_instance(n: int = 12, d: int = 5, env_count: int = 3, seed: int = 0):
    rng = stream(seed, "gradcheck.instance")
    X = rng.normal(size=(n, d))
    edges = [p for p in itertools.combinations(range(n), 2) if rng.random() < 0.3]
    net, F, _ = fit_membership(X, edges, env_count, MembershipConfig(hidden=8, epochs=30),
                               seed=seed)
    g = Hypergraph(X, tuple(extract_hyperedges(F)), tuple(edges))
    lg = build_line_graph(g, max_len=2, repeats=5, seed=seed)
    return g, net, Operators.build(g, build_incidence(g), lg)


def random_instance_check(points: int = 20, seed: int = 0, eps: float = 1e-5) -> dict:
    """Max relative error of backprop vs central differences over random parameter points.

    Covers every model tensor plus the membership network (joint objective).
    """
    t0 = time.perf_counter()
    g, net, ops = random_instance(seed=seed)
    cfg = TrainConfig(seed=seed, neg_ratio=2, joint=True)
    worst, checked, skipped, where = 0.0, 0, 0, ""
    for point in range(points):
        params = ModelParams.init(g.feature_dim, ModelConfig((4, 4), (4, 4)), seed + point, ops)
        trainer = Trainer(g, ops, params, cfg, membership=net)
        rng = stream(seed, "gradcheck.point", point)
        for t in trainer.trainable():
            t.data = t.data + 0.1 * rng.standard_normal(t.shape)
        batch = trainer.batch(point)
        res = check_gradients(lambda: trainer.objective(batch, point)[0], trainer.trainable(),
                              eps=eps)
        checked += res.checked
        skipped += res.skipped_kinks
        if res.max_rel_error > worst:
            worst, where = res.max_rel_error, f"point {point}: {res.worst}"
    return {"max_rel_error": float(worst), "worst_entry": where, "points": points,
            "entries_checked": checked, "entries_skipped_at_kinks": skipped,
            "node_count": g.node_count, "hyperedge_count": g.edge_count,
            "seconds": round(time.perf_counter() - t0, 3)}
