import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from sbm_lab.errors import InvalidParams, LabelOutOfRange, NegativeRate, SizeMismatch
from sbm_lab.model import (GraphSample, ModelParams, ModelTag, RegimeKind, alignment,
                           alignment_bruteforce, alignment_weight, classify_regime,
                           confusion_matrix, forward_params, invert_params, make_rng,
                           random_labeling, sample_er, sample_sbm, sample_tilde_sbm)


@given(st.floats(0.1, 50), st.floats(0, 1), st.integers(2, 60))
def test_invert_forward_roundtrip(d, lam, q):
    a, b = invert_params(d, lam, q)
    d2, lam2 = forward_params(a, b, q)
    assert math.isclose(d2, d, rel_tol=1e-12)
    assert math.isclose(lam2, lam, rel_tol=1e-9, abs_tol=1e-12)


def test_invert_rejects_out_of_range_lambda():
    with pytest.raises(NegativeRate):
        invert_params(5, 1.2, 3)
    with pytest.raises(NegativeRate):
        invert_params(5, -0.6, 3)


def test_params_validation():
    with pytest.raises(InvalidParams):
        ModelParams(10, 1, 1, 1)
    with pytest.raises(NegativeRate):
        ModelParams(10, 2, -1, 1)


def test_derived_quantities():
    p = ModelParams.from_dl(10_000, 100, 5, 0.8)
    assert math.isclose(p.s, 4.0)
    assert math.isclose(p.ks_snr, 3.2)
    assert math.isclose(p.chi, 0.5)
    assert math.isclose(p.modified_snr, 5 * 0.8 ** 2)


def test_regimes():
    assert classify_regime(ModelParams.from_dl(10_000, 100, 5, 0.8)).kind == RegimeKind.ABOVE_KS
    r = classify_regime(ModelParams.from_dl(10 ** 6, 10 ** 4, 20, 0.2))  # chi = 2/3
    assert r.kind == RegimeKind.BELOW_KS_ABOVE_MODIFIED
    assert classify_regime(ModelParams.from_dl(1000, 10, 3, 0.1)).kind == RegimeKind.BELOW_BOTH
    assert classify_regime(ModelParams.from_dl(1000, 10, 3, 0.1)).it_impossible


labels = st.integers(2, 6).flatmap(
    lambda q: st.tuples(st.just(q), st.integers(1, 40)).flatmap(
        lambda t: st.tuples(st.just(t[0]),
                            st.lists(st.integers(0, t[0] - 1), min_size=t[1], max_size=t[1]),
                            st.lists(st.integers(0, t[0] - 1), min_size=t[1], max_size=t[1]))))


@given(labels)
def test_alignment_matches_bruteforce(case):
    q, s, t = case
    assert math.isclose(alignment(s, t, q), alignment_bruteforce(s, t, q))


@given(labels, st.randoms())
def test_alignment_relabel_invariant(case, r):
    q, s, t = case
    perm = list(range(q))
    r.shuffle(perm)
    t2 = [perm[x] for x in t]
    assert math.isclose(alignment(s, t, q), alignment(s, t2, q))
    assert 1 / q - 1e-12 <= alignment(s, t, q) <= 1


def test_alignment_examples():
    assert alignment([0, 1, 2, 0], [0, 0, 1, 2], 3) == 0.75
    assert alignment([0, 1, 2], [2, 0, 1], 3) == 1.0
    assert confusion_matrix([0, 1], [1, 1], 2).tolist() == [[0, 1], [0, 1]]
    with pytest.raises(LabelOutOfRange):
        alignment([0, 3], [0, 1], 3)
    assert alignment_weight(2, 2, 5) == 4 and alignment_weight(1, 2, 5) == -1


def test_random_labeling_baseline():
    q, n = 20, 50_000
    truth = random_labeling(n, q, 1)
    a = alignment(random_labeling(n, q, 2), truth, q)
    assert abs(a - 1 / q) < 0.01


def test_sampler_reproducible_and_canonical():
    p = ModelParams.from_dl(3000, 10, 6, 0.5)
    g1, g2 = sample_sbm(p, 7), sample_sbm(p, 7)
    assert np.array_equal(g1.edges, g2.edges) and np.array_equal(g1.truth, g2.truth)
    e = g1.edges
    assert np.all(e[:, 0] < e[:, 1])
    assert len(np.unique(e, axis=0)) == len(e)
    assert g1.model_tag == ModelTag.SBM and g1.seed == 7


def test_sbm_edge_rates():
    p = ModelParams.from_dl(6000, 4, 8, 0.6)
    g = sample_sbm(p, 11)
    same = g.truth[g.edges[:, 0]] == g.truth[g.edges[:, 1]]
    sizes = np.bincount(g.truth, minlength=4)
    n_same = sum(s * (s - 1) / 2 for s in sizes)
    n_diff = p.n * (p.n - 1) / 2 - n_same
    for obs, N, prob in [(same.sum(), n_same, p.a / p.n), (len(same) - same.sum(), n_diff, p.b / p.n)]:
        sd = math.sqrt(N * prob * (1 - prob))
        assert abs(obs - N * prob) < 5 * sd


def test_sbm_disassortative_rates():
    p = ModelParams.from_dl(6000, 3, 8, -0.4)
    g = sample_sbm(p, 3)
    same = g.truth[g.edges[:, 0]] == g.truth[g.edges[:, 1]]
    sizes = np.bincount(g.truth, minlength=3)
    n_same = sum(s * (s - 1) / 2 for s in sizes)
    prob = p.a / p.n
    assert abs(same.sum() - n_same * prob) < 5 * math.sqrt(n_same * prob)


def test_lambda_zero_matches_er_degrees():
    p = ModelParams.from_dl(4000, 10, 5, 0.0)
    ds = sample_sbm(p, 1).degrees
    de = sample_er(4000, 5, 2).degrees
    assert stats.ks_2samp(ds, de).pvalue > 0.001


def test_er_truth_unassigned():
    g = sample_er(100, 3, 0)
    assert np.all(g.truth == -1) and g.model_tag == ModelTag.ER


def test_tilde_sbm_sizes():
    g = sample_tilde_sbm(10, [3, 3, 4], 0.5, 0.1, 0)
    assert np.bincount(g.truth).tolist() == [3, 3, 4]
    assert g.model_tag == ModelTag.TILDE_SBM
    with pytest.raises(SizeMismatch):
        sample_tilde_sbm(10, [3, 3], 0.5, 0.1, 0)
    full = sample_tilde_sbm(6, [3, 3], 1.0, 0.0, 0)
    assert full.m == 6
    assert all(full.truth[u] == full.truth[v] for u, v in full.edges)


def test_text_roundtrip():
    g = sample_sbm(ModelParams.from_dl(200, 4, 3, 0.5), 5)
    h = GraphSample.from_text(g.to_text())
    assert np.array_equal(g.edges, h.edges) and np.array_equal(g.truth, h.truth)
    assert (h.n, h.q, h.seed, h.model_tag) == (g.n, g.q, g.seed, g.model_tag)


def test_graph_rejects_self_loops():
    with pytest.raises(InvalidParams):
        GraphSample.from_edges(3, [(1, 1)])


def test_neighbors_and_has_edge():
    g = GraphSample.from_edges(4, [(0, 1), (2, 1), (3, 0)])
    assert g.neighbors(1).tolist() == [0, 2]
    assert g.has_edge(1, 2) and not g.has_edge(2, 3)
    assert g.degrees.tolist() == [2, 2, 1, 1]


def test_rng_is_counter_based():
    assert isinstance(make_rng(3).bit_generator, np.random.Philox)
