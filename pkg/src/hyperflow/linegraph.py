"""Line-graph estimation for hypergraphs.

Walks alternate hyperedge -> member -> another hyperedge of that member.
Every adjacent hyperedge pair visited is counted, and line-graph edges are
drawn from the empirical pair frequencies.
"""

from __future__ import annotations

import os
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .graph import Hypergraph, LineGraph
from .rng import stream

THREADS_ENV = "HYPERFLOW_THREADS"


def worker_count() -> int:
    raw = os.environ.get(THREADS_ENV, "")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


@dataclass
class WalkMultiset:
    pair_counts: Counter = field(default_factory=Counter)

    @property
    def total(self) -> int:
        return sum(self.pair_counts.values())

    def frequencies(self) -> dict[tuple[int, int], float]:
        total = self.total
        return {k: c / total for k, c in sorted(self.pair_counts.items())} if total else {}


def _walk_repeat(members, memberships, max_len: int, seed: int, repeat: int) -> Counter:
    rng = stream(seed, "line.walk", repeat)
    counts: Counter = Counter()
    for start in range(len(members)):
        cur = start
        for _ in range(max_len):
            pool = members[cur]
            node = pool[rng.integers(len(pool))]
            others = [k for k in memberships[node] if k != cur]
            if not others:
                break
            nxt = others[rng.integers(len(others))]
            counts[(min(cur, nxt), max(cur, nxt))] += 1
            cur = nxt
    return counts


def random_walk_multiset(g: Hypergraph, max_len: int = 4, repeats: int = 10,
                         seed: int = 0, workers: int | None = None) -> WalkMultiset:
    if max_len < 1 or repeats < 1:
        raise ValueError("max_len and repeats must be >= 1")
    members = [sorted(e) for e in g.hyperedges]
    memberships = [sorted(s) for s in g.node_memberships()]
    workers = workers or worker_count()

    def run(r):
        return _walk_repeat(members, memberships, max_len, seed, r)

    total: Counter = Counter()
    if workers == 1:
        for r in range(repeats):
            total.update(run(r))
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for c in pool.map(run, range(repeats)):
                total.update(c)
    return WalkMultiset(total)


def sample_line_edges(C: WalkMultiset, node_count: int, draws: int | None = None,
                      seed: int = 0) -> LineGraph:
    """Draw ``draws`` pairs i.i.d. from the empirical pair frequencies (default |C|)."""
    if not C.pair_counts:
        return LineGraph(node_count)
    keys = sorted(C.pair_counts)
    counts = np.array([C.pair_counts[k] for k in keys], dtype=np.float64)
    m = C.total if draws is None else draws
    if m < 1:
        raise ValueError("draw count must be >= 1")
    picks = stream(seed, "line.sample").choice(len(keys), size=m, p=counts / counts.sum())
    return LineGraph(node_count, tuple(keys[i] for i in np.unique(picks)))


def exact_similarity(g: Hypergraph) -> np.ndarray:
    """Pairwise Jaccard similarity of hyperedges, zero diagonal."""
    m = g.edge_count
    if m < 1:
        raise ValueError("need at least one hyperedge")
    s = np.zeros((m, m))
    edges = g.hyperedges
    for i in range(m):
        for j in range(i + 1, m):
            inter = len(edges[i] & edges[j])
            if inter:
                s[i, j] = s[j, i] = inter / len(edges[i] | edges[j])
    return s


def bernoulli_line_graph(s: np.ndarray, seed: int = 0) -> LineGraph:
    s = np.asarray(s, dtype=np.float64)
    m = s.shape[0]
    iu, ju = np.triu_indices(m, k=1)
    keep = stream(seed, "line.bernoulli").random(len(iu)) < s[iu, ju]
    return LineGraph(m, tuple(zip(iu[keep].tolist(), ju[keep].tolist())))


def one_step_distribution(g: Hypergraph) -> dict[tuple[int, int], float]:
    """Exact pair distribution of single-hop walks started once from every hyperedge.

    Enumerates every (start hyperedge, member, next hyperedge) triple; used
    as the reference the sampled multiset is checked against.
    """
    memberships = g.node_memberships()
    mass: Counter = Counter()
    for start, e in enumerate(g.hyperedges):
        for u in e:
            others = [k for k in memberships[u] if k != start]
            for k in others:
                mass[(min(start, k), max(start, k))] += 1.0 / (len(e) * len(others))
    total = sum(mass.values())
    return {k: v / total for k, v in sorted(mass.items())} if total else {}


def total_variation(p: dict, q: dict) -> float:
    keys = set(p) | set(q)
    return 0.5 * sum(abs(p.get(k, 0.0) - q.get(k, 0.0)) for k in keys)


def build_line_graph(g: Hypergraph, max_len: int = 4, repeats: int = 10,
                     draws: int | None = None, seed: int = 0) -> LineGraph:
    C = random_walk_multiset(g, max_len, repeats, seed)
    return sample_line_edges(C, g.edge_count, draws, seed)
