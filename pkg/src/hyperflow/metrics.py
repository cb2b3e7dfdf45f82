"""Sociological criteria: conformity, equivalence, polarization, evolving."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .graph import canonical_edges
from .rng import stream

P_FLOOR = 1e-12
EQ_EPS = 1e-9


def _sigmoid(z):
    z = np.asarray(z, dtype=np.float64)
    return np.where(z >= 0, 1.0 / (1.0 + np.exp(-np.abs(z))),
                    np.exp(-np.abs(z)) / (1.0 + np.exp(-np.abs(z))))


def group_representation(emb: np.ndarray, hyperedge) -> np.ndarray:
    members = sorted(hyperedge)
    if not members:
        raise ValueError("hyperedge is empty")
    return emb[members].mean(axis=0)


def membership_confidence(emb: np.ndarray, u: int, hyperedge) -> float:
    """sigmoid(<emb_u, mean member embedding>)."""
    return float(np.clip(_sigmoid(emb[u] @ group_representation(emb, hyperedge)), *P_RANGE))


# float64 rounds the logistic to exactly 0 or 1 for large |z|; keep it open
P_RANGE = (np.finfo(np.float64).tiny, np.nextafter(1.0, 0.0))


def member_confidences(emb: np.ndarray, hyperedge) -> np.ndarray:
    members = sorted(hyperedge)
    return np.clip(_sigmoid(emb[members] @ group_representation(emb, hyperedge)), *P_RANGE)


def conformity(emb: np.ndarray, hyperedges, rho: float = 0.5) -> float:
    if not 0.0 < rho < 1.0:
        raise ValueError("significance threshold rho must lie in (0, 1)")
    if not hyperedges:
        raise ValueError("conformity needs at least one hyperedge")
    return float(np.mean([np.mean(member_confidences(emb, e) > rho) for e in hyperedges]))


def _jaccard(a: set, b: set) -> float:
    union = len(a | b)
    return len(a & b) / union if union else 0.0


@dataclass
class Equivalence:
    value: float
    numerator: float
    denominator: float
    infinite: bool
    exact: bool

    def as_json(self):
        return "inf" if self.infinite else self.value


def _env_sets(hyperedges, n: int) -> list[set[int]]:
    envs: list[set[int]] = [set() for _ in range(n)]
    for k, e in enumerate(hyperedges):
        for u in e:
            envs[u].add(k)
    return envs


def equivalence(hyperedges, edges, node_count: int, samples: int = 10_000,
                seed: int = 0) -> Equivalence:
    """Environment-Jaccard ratio between connected and non-connected pairs.

    Unordered pairs are enumerated exactly when there are no more than
    ``samples`` of them; otherwise ``samples`` pairs are drawn uniformly.
    """
    edges = canonical_edges(edges)
    if not edges:
        raise ValueError("equivalence needs at least one pairwise edge")
    n = node_count
    edge_set = set(edges)
    non_adj_count = n * (n - 1) // 2 - len(edge_set)
    if non_adj_count <= 0:
        raise ValueError("no non-adjacent pairs to compare against")
    envs = _env_sets(hyperedges, n)
    rng = stream(seed, "metrics.eq")

    if len(edges) <= samples:
        pos = edges
    else:
        pos = [edges[i] for i in rng.integers(len(edges), size=samples)]
    if non_adj_count <= samples:
        neg = [p for p in itertools.combinations(range(n), 2) if p not in edge_set]
    else:
        neg = []
        while len(neg) < samples:
            u, v = rng.integers(n, size=2)
            if u != v and (min(u, v), max(u, v)) not in edge_set:
                neg.append((u, v))
    num = float(np.mean([_jaccard(envs[u], envs[v]) for u, v in pos]))
    den = float(np.mean([_jaccard(envs[u], envs[v]) for u, v in neg]))
    exact = len(edges) <= samples and non_adj_count <= samples
    return Equivalence(num / (den + EQ_EPS), num, den, den < EQ_EPS, exact)


def group_entropy(emb: np.ndarray, hyperedge, mode: str = "sum") -> float:
    """Sum (or mean) over members of -log p_ui."""
    h = -np.log(np.maximum(member_confidences(emb, hyperedge), P_FLOOR))
    if mode == "sum":
        return float(h.sum())
    if mode == "mean":
        return float(h.mean())
    raise ValueError(f"unknown entropy mode {mode!r}")


def evolving_ratio(snapshots, hyperedge) -> list[dict]:
    """Per stage: count and fraction of original members with p_ui > 0.5."""
    if not snapshots:
        raise ValueError("need at least one embedding snapshot")
    size = len(hyperedge)
    out = []
    for t, snap in enumerate(snapshots):
        stage, emb = snap if isinstance(snap, tuple) else (t, snap)
        count = int(np.sum(member_confidences(emb, hyperedge) > 0.5))
        out.append({"stage": int(stage), "count": count, "ratio": count / size})
    return out


@dataclass
class MetricReport:
    conformity: float
    equivalence: Equivalence
    group_entropies: dict[int, float]
    initial_entropies: dict[int, float] = field(default_factory=dict)
    evolving: dict[int, list[dict]] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "conformity": self.conformity,
            "equivalence": self.equivalence.as_json(),
            "group_entropies": {str(k): v for k, v in self.group_entropies.items()},
            "initial_group_entropies": {str(k): v for k, v in self.initial_entropies.items()},
            "evolving": [dict(hyperedge=k, **row) for k, rows in self.evolving.items()
                         for row in rows],
        }

    def entropy_table(self) -> str:
        """Tab-delimited Initial/Updated rows, one column per group."""
        groups = sorted(self.group_entropies)
        lines = ["\t" + "\t".join(f"G{k}" for k in groups)]
        if self.initial_entropies:
            lines.append("Initial\t" + "\t".join(f"{self.initial_entropies[k]:.4f}" for k in groups))
        lines.append("Updated\t" + "\t".join(f"{self.group_entropies[k]:.4f}" for k in groups))
        return "\n".join(lines) + "\n"


def compute_report(emb: np.ndarray, hyperedges, edges, node_count: int, *, rho: float = 0.5,
                   samples: int = 10_000, entropy_mode: str = "sum", seed: int = 0,
                   initial_emb: np.ndarray | None = None, snapshots=None) -> MetricReport:
    hyperedges = list(hyperedges)
    ent = {k: group_entropy(emb, e, entropy_mode) for k, e in enumerate(hyperedges)}
    init = ({k: group_entropy(initial_emb, e, entropy_mode) for k, e in enumerate(hyperedges)}
            if initial_emb is not None else {})
    evolving = ({k: evolving_ratio(snapshots, e) for k, e in enumerate(hyperedges)}
                if snapshots else {})
    return MetricReport(conformity(emb, hyperedges, rho),
                        equivalence(hyperedges, edges, node_count, samples, seed),
                        ent, init, evolving)
