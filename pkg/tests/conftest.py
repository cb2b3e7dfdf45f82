import itertools

import numpy as np
import pytest
from hypothesis import settings

from hyperflow.graph import Hypergraph

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def acceptance_log():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


def make_graph(n, hyperedges=(), edges=(), d=3, seed=0, **kw):
    X = np.random.default_rng(seed).normal(size=(n, d))
    return Hypergraph(X, tuple(hyperedges), tuple(edges), node_count=n, **kw)


def random_hypergraph(rng, n, m, max_size=None, edge_p=0.3, d=3):
    """Random instance with m distinct nonempty hyperedges and a random pairwise graph."""
    max_size = max_size or n
    if m > 2 ** n - 1:
        raise ValueError(f"only {2 ** n - 1} distinct nonempty hyperedges exist on {n} nodes")
    hedges = set()
    while len(hedges) < m:
        size = int(rng.integers(1, max_size + 1))
        hedges.add(frozenset(rng.choice(n, size=size, replace=False).tolist()))
    edges = [p for p in itertools.combinations(range(n), 2) if rng.random() < edge_p]
    return Hypergraph(rng.normal(size=(n, d)), tuple(sorted(hedges, key=sorted)), tuple(edges),
                      node_count=n)
