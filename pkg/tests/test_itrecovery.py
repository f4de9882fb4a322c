import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from sbm_lab.errors import BudgetExceeded, InvalidParams, TooLarge
from sbm_lab.itrecovery import (argmax_uniform_ties, balance_bounds, bp_step,
                                recover_inefficient, recover_inefficient_details,
                                sample_broadcast_tree, search_good_partition, split_edges,
                                within_edges)
from sbm_lab.model import (GraphSample, ModelParams, alignment, make_rng, random_labeling,
                           sample_sbm)


def beliefs(q, k):
    return st.lists(st.lists(st.floats(0.001, 1), min_size=q, max_size=q), min_size=k, max_size=k).map(
        lambda rows: np.array([np.array(r) / sum(r) for r in rows]).reshape(k, q))


@given(st.integers(2, 8).flatmap(lambda q: st.tuples(st.just(q), st.integers(0, 6).flatmap(
    lambda k: beliefs(q, k)))), st.floats(0, 0.999))
def test_bp_output_is_distribution(case, lam):
    q, X = case
    out = bp_step(X, lam, q)
    assert np.all(out >= 0)
    assert abs(out.sum() - 1) < 1e-12


@given(st.integers(2, 6).flatmap(lambda q: st.tuples(st.just(q), beliefs(q, 3), st.permutations(range(q)))),
       st.floats(0, 0.999))
def test_bp_label_equivariant(case, lam):
    q, X, perm = case
    perm = np.array(perm)
    assert np.array_equal(bp_step(X[:, perm], lam, q), bp_step(X, lam, q)[perm])


def test_bp_contract_examples():
    assert np.array_equal(bp_step(np.full((4, 3), 1 / 3), 0.7, 3), np.full(3, 1 / 3))
    assert np.array_equal(bp_step([[0.9, 0.1], [0.2, 0.8]], 0.0, 2), np.full(2, 0.5))
    out = bp_step([[1.0, 0.0]], 0.5, 2)
    assert np.allclose(out, [0.75, 0.25], atol=1e-12, rtol=0)
    assert np.array_equal(bp_step(np.empty((0, 4)), 0.5, 4), np.full(4, 0.25))


def test_bp_rejects_negative_bracket():
    with pytest.raises(InvalidParams):
        bp_step([[1.0, 0.0, 0.0]], -0.9, 3)


def test_argmax_ties_uniform():
    rng = make_rng(0)
    picks = [argmax_uniform_ties(np.array([0.4, 0.4, 0.2]), rng) for _ in range(2000)]
    assert set(picks) == {0, 1}
    assert abs(np.mean(picks) - 0.5) < 0.05


def test_two_triangles_exhaustive():
    g = GraphSample.from_edges(6, [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)])
    p = ModelParams(6, 2, 3.0, 0.0)
    res = search_good_partition(g, p, mode="exhaustive")
    assert res.objective == 6
    assert alignment(res.labels, [0, 0, 0, 1, 1, 1], 2) == 1.0


def test_exhaustive_guard():
    g = GraphSample.from_edges(15, [])
    with pytest.raises(TooLarge):
        search_good_partition(g, ModelParams(15, 2, 1, 1), mode="exhaustive")


def test_heuristic_matches_exhaustive_n12():
    p = ModelParams.from_dl(12, 2, 4, 0.9)
    same = 0
    for t in range(100):
        g = sample_sbm(p, t)
        ex = search_good_partition(g, p, mode="exhaustive")
        he = search_good_partition(g, p, budget=10 ** 5, rng=t, mode="heuristic")
        lo, hi = balance_bounds(12, 2)
        assert np.all((np.bincount(he.labels, minlength=2) >= lo) & (np.bincount(he.labels, minlength=2) <= hi))
        assert he.objective == within_edges(g.edges, he.labels)
        same += ex.objective == he.objective
    assert same >= 95


def test_budget_exceeded_carries_best():
    p = ModelParams.from_dl(400, 4, 6, 0.8)
    g = sample_sbm(p, 0)
    with pytest.raises(BudgetExceeded) as info:
        search_good_partition(g, p, budget=10, rng=0, mode="heuristic")
    assert info.value.best is not None and len(info.value.best) == 400


def test_lambda_zero_search_near_random_alignment():
    p = ModelParams.from_dl(300, 3, 6, 0.0)
    algo, rand = [], []
    for t in range(50):
        g = sample_sbm(p, t)
        res = search_good_partition(g, p, budget=20_000, rng=t)
        algo.append(alignment(res.labels, g.truth, 3))
        rand.append(alignment(random_labeling(300, 3, 1000 + t), g.truth, 3))
    se = math.sqrt(np.var(algo, ddof=1) / 50 + np.var(rand, ddof=1) / 50)
    assert abs(np.mean(algo) - np.mean(rand)) < 3 * se


def test_edge_split_partition():
    g = sample_sbm(ModelParams.from_dl(2000, 4, 8, 0.5), 0)
    bad = 0
    for t in range(200):
        E1, E2 = split_edges(g, make_rng(t))
        both = np.concatenate([E1, E2])
        assert len(both) == g.m
        assert len(np.unique(both, axis=0)) == g.m
        bad += abs(len(E1) - len(E2)) > 4 * math.sqrt(g.m)
    assert bad <= 2


def test_vertex_without_e2_neighbours_keeps_search_label():
    p = ModelParams(12, 2, 1.0, 1.0)
    empty = recover_inefficient_details(GraphSample.from_edges(12, []), p, budget=5000, rng=1)
    assert empty.bp_flip_fraction == 0.0


def test_inefficient_lambda_zero_baseline():
    p = ModelParams.from_dl(300, 3, 6, 0.0)
    algo, rand = [], []
    for t in range(30):
        g = sample_sbm(p, t)
        algo.append(alignment(recover_inefficient(g, p, 20_000, t), g.truth, 3))
        rand.append(alignment(random_labeling(300, 3, 500 + t), g.truth, 3))
    se = math.sqrt(np.var(algo, ddof=1) / 30 + np.var(rand, ddof=1) / 30)
    assert abs(np.mean(algo) - np.mean(rand)) < 3 * se


def test_broadcast_tree_extremes():
    t = sample_broadcast_tree(5, 1.0, 7, 1000, 0)
    assert t.same_label_children == t.n_children
    labs = np.concatenate([sample_broadcast_tree(20, 0.0, 4, 1000, s, root_label=0).child_labels
                           for s in range(300)])
    counts = np.bincount(labs, minlength=4)
    assert stats.chisquare(counts).pvalue > 0.001


def test_broadcast_tree_child_count_binomial():
    n, d = 1000, 5
    rng = make_rng(1)
    C = np.array([sample_broadcast_tree(d, 0.5, 3, n, rng).n_children for _ in range(10 ** 5)])
    top = 15
    obs = np.bincount(np.minimum(C, top), minlength=top + 1)
    pmf = stats.binom.pmf(np.arange(top), n - 1, d / n)
    exp = np.append(pmf, 1 - pmf.sum()) * len(C)
    assert stats.chisquare(obs, exp).pvalue > 0.001


def test_broadcast_tree_same_label_rate():
    q, lam = 5, 0.6
    rng = make_rng(2)
    same = tot = 0
    for _ in range(5000):
        t = sample_broadcast_tree(6, lam, q, 1000, rng)
        same += t.same_label_children
        tot += t.n_children
    p = 1 / q + lam * (q - 1) / q
    assert abs(same / tot - p) < 4 * math.sqrt(p * (1 - p) / tot)


def _joint_hist(pairs, cap_deg=12):
    h = np.zeros((cap_deg + 1, cap_deg + 1))
    for deg, same in pairs:
        h[min(deg, cap_deg), min(same, cap_deg)] += 1
    return h


@pytest.mark.slow
def test_neighbourhood_coupling():
    n, d, q, lam = 10 ** 5, 5.0, 50, 0.6
    p = ModelParams.from_dl(n, q, d, lam)
    rng = make_rng(3)
    reps = 100
    per = max(1, round(math.log(n)))
    passed = 0
    for r in range(reps):
        g = sample_sbm(p, rng)
        vs = rng.choice(n, size=per, replace=False)
        sbm = [(len(g.neighbors(v)), int(np.sum(g.truth[g.neighbors(v)] == g.truth[v]))) for v in vs]
        tree = []
        for _ in range(per):
            t = sample_broadcast_tree(d, lam, q, n, rng)
            tree.append((t.n_children, t.same_label_children))
        h1, h2 = _joint_hist(sbm), _joint_hist(tree)
        keep = (h1 + h2) > 0
        table = np.stack([h1[keep], h2[keep]])
        if table.shape[1] < 2:
            passed += 1
            continue
        passed += stats.chi2_contingency(table)[1] > 0.01
    assert passed >= 95
