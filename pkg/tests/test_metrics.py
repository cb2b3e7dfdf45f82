import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from hyperflow.metrics import (MetricReport, compute_report, conformity, equivalence,
                               evolving_ratio, group_entropy, membership_confidence,
                               member_confidences)


def sigmoid(z):
    return 1 / (1 + np.exp(-z))


def test_confidence_examples():
    assert membership_confidence(np.zeros((3, 2)), 0, {0, 1}) == 0.5
    emb = np.array([[1.0, 2.0], [3.0, -1.0], [0.0, 0.0]])
    mean = np.array([2.0, 0.5])
    assert membership_confidence(emb, 0, {0, 1}) == pytest.approx(sigmoid(1 * 2 + 2 * 0.5),
                                                                  abs=1e-12)
    assert membership_confidence(emb, 1, {0, 1}) == pytest.approx(sigmoid(3 * 2 - 0.5),
                                                                  abs=1e-12)
    with pytest.raises(ValueError):
        membership_confidence(emb, 0, set())


@given(st.integers(0, 10_000))
def test_confidence_open_interval(seed):
    emb = np.random.default_rng(seed).normal(scale=3, size=(5, 3))
    p = member_confidences(emb, {0, 2, 4})
    assert np.all((p > 0) & (p < 1))


def test_conformity_examples():
    emb = np.ones((4, 2))
    assert conformity(emb, [{0, 1}, {2, 3}]) == 1.0
    assert conformity(np.zeros((4, 2)), [{0, 1}], rho=0.5) == 0.0
    # group A fully significant; group B: member 2 positive, member 3 negative
    emb = np.array([[1.0], [1.0], [2.0], [-1.0]])
    assert conformity(emb, [{0, 1}, {2, 3}]) == pytest.approx(0.75)
    with pytest.raises(ValueError):
        conformity(emb, [])
    with pytest.raises(ValueError):
        conformity(emb, [{0}], rho=1.0)


@given(st.integers(0, 10_000))
def test_conformity_rotation_invariant(seed):
    rng = np.random.default_rng(seed)
    emb = rng.normal(size=(6, 3))
    Q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    groups = [{0, 1, 2}, {2, 3, 4, 5}]
    assert conformity(emb, groups) == pytest.approx(conformity(emb @ Q, groups), abs=1e-12)


def jaccard_oracle(hyperedges, edges, n):
    envs = [{k for k, e in enumerate(hyperedges) if u in e} for u in range(n)]
    jac = lambda a, b: len(a & b) / len(a | b) if a | b else 0.0
    es = {tuple(sorted(p)) for p in edges}
    pos = [jac(envs[u], envs[v]) for u, v in es]
    neg = [jac(envs[u], envs[v]) for u, v in itertools.combinations(range(n), 2)
           if (u, v) not in es]
    return np.mean(pos), np.mean(neg)


def test_equivalence_planted_cliques_exact():
    edges = list(itertools.combinations(range(4), 2)) + \
        list(itertools.combinations(range(4, 8), 2)) + [(3, 4)]
    hedges = [set(range(4)), set(range(4, 8))]
    num, den = jaccard_oracle(hedges, edges, 8)
    eq = equivalence(hedges, edges, 8)
    assert eq.exact
    assert eq.numerator == pytest.approx(num) and eq.denominator == pytest.approx(den)
    assert eq.value == pytest.approx(num / (den + 1e-9))
    assert eq.value > 1


def test_equivalence_limits():
    edges = [(0, 1), (2, 3)]
    eq = equivalence([{0, 1}, {2, 3}], edges, 4)
    assert eq.infinite and eq.as_json() == "inf"
    eq = equivalence([set(range(4))], edges, 4)
    assert eq.value == pytest.approx(1.0, abs=1e-8) and not eq.infinite
    with pytest.raises(ValueError):
        equivalence([{0, 1}], [], 3)
    with pytest.raises(ValueError):
        equivalence([{0, 1}], [(0, 1)], 2)


def test_equivalence_sampled_within_three_standard_errors():
    rng = np.random.default_rng(5)
    n = 12
    edges = [p for p in itertools.combinations(range(n), 2) if rng.random() < 0.3]
    hedges = [set(rng.choice(n, 4, replace=False).tolist()) for _ in range(4)]
    full = equivalence(hedges, edges, n, samples=10_000)
    assert full.exact
    samples = 30
    est = equivalence(hedges, edges, n, samples=samples, seed=3)
    assert not est.exact
    envs = [{k for k, e in enumerate(hedges) if u in e} for u in range(n)]
    es = set(edges)
    negj = [len(envs[u] & envs[v]) / len(envs[u] | envs[v]) if envs[u] | envs[v] else 0.0
            for u, v in itertools.combinations(range(n), 2) if (u, v) not in es]
    se = np.std(negj) / np.sqrt(samples)
    assert abs(est.denominator - full.denominator) < 3 * se + 1e-12


def test_group_entropy_examples():
    assert group_entropy(np.zeros((4, 2)), {0, 1, 2, 3}) == pytest.approx(4 * np.log(2))
    assert group_entropy(np.zeros((4, 2)), {0, 1, 2, 3}, "mean") == pytest.approx(np.log(2))
    assert group_entropy(np.array([[40.0]]), {0}) == pytest.approx(0.0, abs=1e-12)
    # clamp keeps extreme negative confidence finite
    emb = np.array([[100.0], [-100.0]])
    assert np.isfinite(group_entropy(emb, {0, 1}))
    with pytest.raises(ValueError):
        group_entropy(np.zeros((2, 1)), {0}, "median")


def test_group_entropy_decreases_when_one_confidence_rises():
    emb = np.array([[1.0, 0.0], [0.0, 1.0], [0.5, 0.5]])
    base = group_entropy(emb, {0, 1, 2})
    p = member_confidences(emb, {0, 1, 2})
    h = -np.log(p)
    h_new = h.copy()
    h_new[1] = -np.log(min(p[1] + 0.1, 0.999))
    assert h_new.sum() < base


def test_evolving_ratio():
    e = {0, 1}
    snaps = [(0, np.zeros((2, 1))), (20, np.ones((2, 1)))]
    rows = evolving_ratio(snaps, e)
    assert rows[0] == {"stage": 0, "count": 0, "ratio": 0.0}
    assert rows[1] == {"stage": 20, "count": 2, "ratio": 1.0}
    assert all(r["ratio"] == 1.0 for r in evolving_ratio([np.ones((2, 2))] * 3, e))
    with pytest.raises(ValueError):
        evolving_ratio([], e)


def test_report_layout():
    emb = np.random.default_rng(0).normal(size=(6, 2))
    rep = compute_report(emb, [{0, 1, 2}, {3, 4, 5}], [(0, 1), (3, 4)], 6,
                         initial_emb=np.zeros((6, 2)), snapshots=[(0, np.zeros((6, 2))),
                                                                  (5, emb)])
    assert isinstance(rep, MetricReport)
    lines = rep.entropy_table().splitlines()
    assert lines[0].split("\t") == ["", "G0", "G1"]
    assert lines[1].startswith("Initial\t") and lines[2].startswith("Updated\t")
    assert float(lines[1].split("\t")[1]) == pytest.approx(3 * np.log(2), abs=1e-4)
    js = rep.to_json()
    assert set(js) >= {"conformity", "equivalence", "group_entropies", "evolving"}
    assert 0 <= js["conformity"] <= 1
    assert all(v >= 0 for v in js["group_entropies"].values())
    assert {r["stage"] for r in js["evolving"]} == {0, 5}
