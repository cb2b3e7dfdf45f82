"""Social-environment (hyperedge) construction.

The learned constructor fits a membership network by the edge
log-likelihood objective and thresholds its output. Clustering,
community and k-hop constructors are kept as baselines.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import networkx as nx
import numpy as np
from sklearn.cluster import KMeans

from . import autodiff as ad
from .graph import canonical_edges, dedup_hyperedges
from .optim import make_optimizer
from .rng import stream

log = logging.getLogger(__name__)

PRODUCT_FLOOR = 1e-9


@dataclass
class MembershipMatrix:
    values: np.ndarray

    @property
    def env_count(self) -> int:
        return self.values.shape[1]


@dataclass
class MembershipNet:
    """One hidden rectifier layer, then C sigmoid outputs."""

    w1: ad.Tensor
    b1: ad.Tensor
    w2: ad.Tensor
    b2: ad.Tensor

    @classmethod
    def init(cls, in_dim: int, hidden: int, env_count: int, rng: np.random.Generator):
        def glorot(a, b, name):
            lim = np.sqrt(6.0 / (a + b))
            return ad.Tensor(rng.uniform(-lim, lim, (a, b)), requires_grad=True, name=name)

        return cls(glorot(in_dim, hidden, "env.w1"),
                   ad.Tensor(np.zeros(hidden), requires_grad=True, name="env.b1"),
                   glorot(hidden, env_count, "env.w2"),
                   ad.Tensor(np.zeros(env_count), requires_grad=True, name="env.b2"))

    def parameters(self) -> list[ad.Tensor]:
        return [self.w1, self.b1, self.w2, self.b2]

    def __call__(self, X) -> ad.Tensor:
        h = ad.relu(ad.matmul(ad.as_tensor(X), self.w1) + self.b1)
        return ad.sigmoid(ad.matmul(h, self.w2) + self.b2)


@dataclass
class MembershipConfig:
    hidden: int = 64
    neg_ratio: int = 5
    epochs: int = 200
    lr: float = 0.01
    optimizer: str = "adam"


def membership_objective(F: ad.Tensor, pos: np.ndarray, neg: np.ndarray) -> ad.Tensor:
    """-E+[log(1 - exp(-f_u.f_v))] + E-[f_u.f_v]."""
    def dots(pairs):
        return ad.tsum(ad.take_rows(F, pairs[:, 0]) * ad.take_rows(F, pairs[:, 1]), axis=1)

    pd = ad.clamp_min(dots(pos), PRODUCT_FLOOR)
    pos_term = ad.mean(ad.log(1.0 - ad.exp(-pd)))
    neg_term = ad.mean(dots(neg)) if len(neg) else ad.Tensor(0.0)
    return neg_term - pos_term


def sample_non_adjacent(n: int, edge_set: set[tuple[int, int]], count: int,
                        rng: np.random.Generator) -> np.ndarray:
    """Uniform ordered non-adjacent, non-self pairs by rejection."""
    if len(edge_set) >= n * (n - 1) // 2:
        return np.empty((0, 2), dtype=np.int64)
    if edge_set:
        e = np.array(sorted(edge_set), dtype=np.int64)
        keys = np.sort(np.concatenate([e[:, 0] * n + e[:, 1], e[:, 1] * n + e[:, 0]]))
    else:
        keys = np.empty(0, dtype=np.int64)
    chunks, filled = [], 0
    while filled < count:
        need = count - filled
        cand = rng.integers(0, n, size=(2 * need + 8, 2))
        code = cand[:, 0] * n + cand[:, 1]
        pos = np.searchsorted(keys, code)
        hit = (pos < len(keys)) & (keys[np.minimum(pos, len(keys) - 1)] == code) if len(keys) \
            else np.zeros(len(code), dtype=bool)
        ok = cand[(cand[:, 0] != cand[:, 1]) & ~hit][:need]
        chunks.append(ok)
        filled += len(ok)
    return np.concatenate(chunks) if chunks else np.empty((0, 2), dtype=np.int64)


def fit_membership(X, edges, env_count: int, cfg: MembershipConfig | None = None,
                   seed: int = 0):
    """Fit the membership network; returns (net, membership, per-epoch objective)."""
    cfg = cfg or MembershipConfig()
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    edges = canonical_edges(edges)
    if not edges:
        raise ValueError("no positive pairs for Eq. 1 (edge set is empty)")
    if env_count < 1 or env_count > n:
        raise ValueError(f"environment count C={env_count} must lie in [1, N={n}]")
    net = MembershipNet.init(X.shape[1], cfg.hidden, env_count, stream(seed, "env.init"))
    opt = make_optimizer(cfg.optimizer, net.parameters(), cfg.lr)
    pos = np.array(edges, dtype=np.int64)
    edge_set = set(edges)
    history = []
    for epoch in range(cfg.epochs):
        rng = stream(seed, "env.neg", epoch)
        neg = sample_non_adjacent(n, edge_set, cfg.neg_ratio * len(pos), rng)
        opt.zero_grad()
        loss = membership_objective(net(X), pos, neg)
        loss.backward()
        opt.step()
        history.append(float(loss.data))
    F = net(X).data
    return net, MembershipMatrix(F), history


def extract_hyperedges(F, tau: float = 0.5) -> list[frozenset[int]]:
    values = F.values if isinstance(F, MembershipMatrix) else np.asarray(F, dtype=np.float64)
    if not 0.0 < tau < 1.0:
        raise ValueError("threshold must lie strictly between 0 and 1")
    member = values >= tau
    member[np.arange(values.shape[0]), values.argmax(axis=1)] = True
    cols = [frozenset(np.flatnonzero(member[:, j]).tolist()) for j in range(values.shape[1])]
    return list(dedup_hyperedges(c for c in cols if c))


def hyperedges_from_clusters(X, k: int, seed: int = 0) -> list[frozenset[int]]:
    X = np.asarray(X, dtype=np.float64)
    if not 1 <= k <= X.shape[0]:
        raise ValueError(f"cluster count k={k} must lie in [1, N={X.shape[0]}]")
    if k == X.shape[0]:
        labels = np.arange(k)
    else:
        km = KMeans(n_clusters=k, n_init=10, random_state=int(seed) & 0x7FFFFFFF)
        labels = km.fit_predict(X)
    groups = [frozenset(np.flatnonzero(labels == c).tolist()) for c in range(k)]
    return list(dedup_hyperedges(g for g in groups if g))


def hyperedges_from_communities(edges) -> list[frozenset[int]]:
    """Greedy modularity communities; singleton communities are dropped."""
    edges = canonical_edges(edges)
    if not edges:
        raise ValueError("community detection needs at least one edge")
    G = nx.Graph(edges)
    comms = nx.community.greedy_modularity_communities(G)
    ordered = sorted((frozenset(c) for c in comms if len(c) >= 2), key=min)
    return list(dedup_hyperedges(ordered))


def hyperedges_from_khop(edges, k: int, node_count: int | None = None) -> list[frozenset[int]]:
    if k < 1:
        raise ValueError("hop count must be >= 1")
    edges = canonical_edges(edges)
    n = node_count if node_count is not None else (max(max(e) for e in edges) + 1 if edges else 0)
    G = nx.Graph()
    G.add_nodes_from(range(n))
    G.add_edges_from(edges)
    hoods = (frozenset(nx.single_source_shortest_path_length(G, u, cutoff=k)) for u in range(n))
    return list(dedup_hyperedges(hoods))


def build_environments(method: str, X, edges, node_count: int, *, env_count: int = 4,
                       tau: float = 0.5, k: int = 1, seed: int = 0,
                       cfg: MembershipConfig | None = None) -> list[frozenset[int]]:
    if method == "learned":
        _, F, _ = fit_membership(X, edges, env_count, cfg, seed=seed)
        return extract_hyperedges(F, tau)
    if method == "cluster":
        return hyperedges_from_clusters(X, env_count, seed=seed)
    if method == "community":
        return hyperedges_from_communities(edges)
    if method == "khop":
        return hyperedges_from_khop(edges, k, node_count)
    raise ValueError(f"unknown environment method {method!r}")
