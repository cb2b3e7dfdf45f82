"""Hypergraphs, incidence algebra and line graphs."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp


class GraphError(ValueError):
    """Raised when graph content violates a structural invariant."""


def canonical_edges(pairs: Iterable[tuple[int, int]]) -> tuple[tuple[int, int], ...]:
    """Symmetrize, drop self-loops and duplicates; each pair stored as (min, max)."""
    out = {(min(u, v), max(u, v)) for u, v in pairs if u != v}
    return tuple(sorted(out))


def dedup_hyperedges(hyperedges: Iterable[Iterable[int]]) -> tuple[frozenset[int], ...]:
    """Merge set-equal hyperedges, keeping first-seen order."""
    seen: dict[frozenset[int], None] = {}
    for e in hyperedges:
        fe = frozenset(int(u) for u in e)
        if fe not in seen:
            seen[fe] = None
    return tuple(seen)


@dataclass(frozen=True)
class Hypergraph:
    features: np.ndarray
    hyperedges: tuple[frozenset[int], ...] = ()
    pairwise_edges: tuple[tuple[int, int], ...] = ()
    hyperedge_weights: np.ndarray | None = None
    node_weights: np.ndarray | None = None
    node_count: int = field(default=-1)

    def __post_init__(self):
        feats = np.asarray(self.features, dtype=np.float64)
        if feats.ndim != 2:
            raise GraphError("features must be a 2-d matrix")
        n = feats.shape[0] if self.node_count < 0 else self.node_count
        if feats.shape[0] != n:
            raise GraphError(f"feature rows ({feats.shape[0]}) != node_count ({n})")
        edges = canonical_edges(self.pairwise_edges)
        for u, v in edges:
            if u < 0 or v >= n:
                raise GraphError(f"pairwise edge ({u}, {v}) out of range [0, {n})")
        hedges = dedup_hyperedges(self.hyperedges)
        for k, e in enumerate(hedges):
            if not e:
                raise GraphError(f"hyperedge {k} is empty")
            if min(e) < 0 or max(e) >= n:
                raise GraphError(f"hyperedge {k} has ids outside [0, {n})")
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "node_count", n)
        object.__setattr__(self, "pairwise_edges", edges)
        object.__setattr__(self, "hyperedges", hedges)
        w, u = default_weights(self)
        if self.hyperedge_weights is not None:
            w = np.asarray(self.hyperedge_weights, dtype=np.float64)
            if w.shape != (len(hedges),):
                raise GraphError("hyperedge_weights length must equal hyperedge count")
        if self.node_weights is not None:
            u = np.asarray(self.node_weights, dtype=np.float64)
            if u.shape != (n,):
                raise GraphError("node_weights length must equal node_count")
        if np.any(w <= 0) or np.any(u <= 0):
            raise GraphError("hyperedge and node weights must be strictly positive")
        object.__setattr__(self, "hyperedge_weights", w)
        object.__setattr__(self, "node_weights", u)
        feats.setflags(write=False)
        w.setflags(write=False)
        u.setflags(write=False)

    @property
    def edge_count(self) -> int:
        return len(self.hyperedges)

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    def with_hyperedges(self, hyperedges: Iterable[Iterable[int]]) -> "Hypergraph":
        """Copy with new hyperedges; weights fall back to their defaults."""
        return replace(self, hyperedges=tuple(hyperedges), hyperedge_weights=None,
                       node_weights=None)

    def node_memberships(self) -> list[set[int]]:
        envs: list[set[int]] = [set() for _ in range(self.node_count)]
        for k, e in enumerate(self.hyperedges):
            for u in e:
                envs[u].add(k)
        return envs


def default_weights(g: Hypergraph) -> tuple[np.ndarray, np.ndarray]:
    """Hyperedge weight = size; node weight = pairwise degree floored at 1."""
    w = np.array([len(e) for e in g.hyperedges], dtype=np.float64)
    deg = np.zeros(g.node_count, dtype=np.float64)
    for a, b in g.pairwise_edges:
        deg[a] += 1
        deg[b] += 1
    return w, np.maximum(deg, 1.0)


@dataclass(frozen=True)
class IncidenceMatrix:
    entries: sp.csr_matrix
    node_degrees: np.ndarray
    edge_degrees: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return self.entries.shape

    def hyperedges(self) -> list[frozenset[int]]:
        csc = self.entries.tocsc()
        return [frozenset(csc.indices[csc.indptr[k]:csc.indptr[k + 1]].tolist())
                for k in range(csc.shape[1])]


def build_incidence(g: Hypergraph) -> IncidenceMatrix:
    if not g.hyperedges:
        raise GraphError("no environments")
    rows, cols = [], []
    for k, e in enumerate(g.hyperedges):
        members = sorted(e)
        rows.extend(members)
        cols.extend([k] * len(members))
    H = sp.csr_matrix((np.ones(len(rows)), (rows, cols)),
                      shape=(g.node_count, g.edge_count))
    dv = np.asarray(H @ g.hyperedge_weights).ravel()
    de = np.asarray(H.T @ g.node_weights).ravel()
    return IncidenceMatrix(H, dv, de)


def pairwise_adjacency(g: Hypergraph, add_self_loops: bool = True
                       ) -> tuple[sp.csr_matrix, np.ndarray]:
    n = g.node_count
    if g.pairwise_edges:
        src, dst = np.array(g.pairwise_edges).T
        rows = np.concatenate([src, dst])
        cols = np.concatenate([dst, src])
    else:
        rows = cols = np.empty(0, dtype=np.int64)
    A = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    if add_self_loops:
        A = A + sp.identity(n, format="csr")
    A.sum_duplicates()
    return A.tocsr(), np.asarray(A.sum(axis=1)).ravel()


def normalized_adjacency(A: sp.spmatrix, degrees: np.ndarray) -> sp.csr_matrix:
    """Symmetric normalization D^-1/2 A D^-1/2."""
    if np.any(degrees <= 0):
        raise GraphError("zero-degree row in adjacency; self-loops are required")
    d = sp.diags(1.0 / np.sqrt(degrees))
    return (d @ A @ d).tocsr()


@dataclass(frozen=True)
class LineGraph:
    node_count: int
    edges: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        edges = canonical_edges(self.edges)
        for i, j in edges:
            if i < 0 or j >= self.node_count:
                raise GraphError(f"line-graph edge ({i}, {j}) out of range")
        object.__setattr__(self, "edges", edges)

    def adjacency(self, add_self_loops: bool = True) -> tuple[sp.csr_matrix, np.ndarray]:
        skeleton = Hypergraph(np.zeros((self.node_count, 0)), pairwise_edges=self.edges)
        return pairwise_adjacency(skeleton, add_self_loops)


def hyperedges_as_lists(hyperedges: Sequence[Iterable[int]]) -> list[list[int]]:
    return [sorted(e) for e in hyperedges]
