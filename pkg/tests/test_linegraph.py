import itertools
from collections import Counter
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from hyperflow.linegraph import (WalkMultiset, bernoulli_line_graph, exact_similarity,
                                 random_walk_multiset, sample_line_edges, total_variation)

from conftest import make_graph, random_hypergraph


def test_single_and_disjoint_hyperedges_give_empty_multiset():
    assert random_walk_multiset(make_graph(3, [{0, 1, 2}]), 3, 20).total == 0
    assert random_walk_multiset(make_graph(2, [{0}, {1}]), 3, 20).total == 0


def test_two_edge_walk_tree():
    # from either hyperedge the walk moves iff it picks the shared member 1 (p = 1/2)
    g = make_graph(3, [{0, 1}, {1, 2}])
    C = random_walk_multiset(g, max_len=1, repeats=4000, seed=5)
    assert set(C.pair_counts) == {(0, 1)}
    walks = 2 * 4000
    sd = np.sqrt(walks * 0.25)
    assert abs(C.total - walks / 2) < 4 * sd


def test_walk_length_caps_pairs():
    g = make_graph(4, [{0, 1}, {1, 2}, {2, 3}])
    for L in (1, 2, 5):
        C = random_walk_multiset(g, max_len=L, repeats=30, seed=1)
        assert C.total <= L * 30 * g.edge_count


def test_sample_line_edges_examples():
    C = WalkMultiset(Counter({(0, 1): 10}))
    for m in (1, 5, 50):
        assert sample_line_edges(C, 2, m, seed=m).edges == ((0, 1),)
    assert sample_line_edges(WalkMultiset(), 3, 5).edges == ()
    with pytest.raises(ValueError):
        sample_line_edges(C, 2, 0)


def test_sample_line_edges_frequency():
    C = WalkMultiset(Counter({(0, 1): 9, (1, 2): 1}))
    trials = 10_000
    hits = sum(sample_line_edges(C, 3, 1, seed=s).edges == ((0, 1),) for s in range(trials))
    sd = np.sqrt(0.9 * 0.1 / trials)
    assert abs(hits / trials - 0.9) < 0.02
    assert abs(hits / trials - 0.9) < 4 * sd


@given(st.integers(0, 10_000))
def test_sampled_edges_have_nonzero_count(seed):
    g = random_hypergraph(np.random.default_rng(seed), 8, 5, max_size=4)
    C = random_walk_multiset(g, 3, 5, seed=seed)
    lg = sample_line_edges(C, g.edge_count, seed=seed)
    assert set(lg.edges) <= {k for k, c in C.pair_counts.items() if c > 0}


def test_exact_similarity_examples():
    s = exact_similarity(make_graph(3, [{0, 1}, {1, 2}]))
    assert s[0, 1] == pytest.approx(1 / 3, abs=1e-15)
    assert s[0, 0] == 0
    assert exact_similarity(make_graph(5, [{0, 1, 2}, {3, 4}]))[0, 1] == 0


@given(st.integers(0, 10_000))
def test_exact_similarity_symmetric_and_equivariant(seed):
    rng = np.random.default_rng(seed)
    g = random_hypergraph(rng, 7, 5)
    s = exact_similarity(g)
    np.testing.assert_array_equal(s, s.T)
    assert np.all((s >= 0) & (s <= 1))
    perm = rng.permutation(g.edge_count)
    s2 = exact_similarity(g.with_hyperedges([g.hyperedges[k] for k in perm]))
    np.testing.assert_array_equal(s2, s[np.ix_(perm, perm)])


def test_bernoulli_examples():
    assert bernoulli_line_graph(np.zeros((4, 4)), seed=0).edges == ()
    s = np.zeros((3, 3))
    s[0, 2] = s[2, 0] = 1.0
    for seed in range(20):
        assert (0, 2) in bernoulli_line_graph(s, seed).edges
    s = np.array([[0, 0.5], [0.5, 0]])
    trials = 10_000
    rate = np.mean([len(bernoulli_line_graph(s, t).edges) for t in range(trials)])
    assert abs(rate - 0.5) < 0.02


def brute_force_one_step(hyperedges):
    """Exact pair law of one hop from a uniform start: enumerate (start, member, next)."""
    memberships = {}
    for k, e in enumerate(hyperedges):
        for u in e:
            memberships.setdefault(u, []).append(k)
    mass = {}
    for start, e in enumerate(hyperedges):
        for u in e:
            others = [k for k in memberships[u] if k != start]
            for k in others:
                key = (min(start, k), max(start, k))
                mass[key] = mass.get(key, Fraction(0)) + Fraction(1, len(e) * len(others))
    total = sum(mass.values())
    return {k: float(v / total) for k, v in mass.items()}


def test_consistency_small_instance():
    g = make_graph(4, [{0, 1}, {1, 2, 3}, {3}])
    C = random_walk_multiset(g, 1, 3000, seed=2)
    assert total_variation(C.frequencies(), brute_force_one_step(g.hyperedges)) < 0.05


def test_worker_count_does_not_change_result():
    g = random_hypergraph(np.random.default_rng(0), 10, 6)
    a = random_walk_multiset(g, 4, 12, seed=3, workers=1)
    b = random_walk_multiset(g, 4, 12, seed=3, workers=4)
    assert a.pair_counts == b.pair_counts


def test_invalid_arguments():
    with pytest.raises(ValueError):
        random_walk_multiset(make_graph(2, [{0, 1}]), 0, 1)
