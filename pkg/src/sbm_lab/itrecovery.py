"""Exponential-time recovery: split edges, search a good partition, one BP step."""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.sparse import csr_matrix

from .errors import BudgetExceeded, InvalidParams, NumericalUnderflow, TooLarge
from .model import (GraphSample, ModelParams, RngLike, alignment, classify_regime,
                    make_rng, sample_sbm)

EXHAUSTIVE_MAX_N = 14
HEURISTIC_MAX_N = 10_000


# ---------------------------------------------------------------- BP

def bp_step(neighbor_beliefs, lam: float, q: int) -> np.ndarray:
    """Depth-1 belief propagation update at a vertex from its neighbours' beliefs."""
    X = np.asarray(neighbor_beliefs, dtype=float).reshape(-1, q)
    if len(X) == 0:
        return np.full(q, 1.0 / q)
    brackets = 1.0 + lam * q * (X - 1.0 / q)
    if np.any(brackets < 0):
        raise InvalidParams("belief bracket became negative; need lambda in [0, 1]")
    with np.errstate(divide="ignore"):
        logs = np.log(brackets).sum(axis=0)
    top = logs.max()
    if not np.isfinite(top):
        raise NumericalUnderflow("every label has vanishing likelihood")
    w = np.exp(logs - top)
    return w / math.fsum(w)  # correctly rounded, so permuting labels permutes the output exactly


def argmax_uniform_ties(x: np.ndarray, rng, rtol: float = 1e-12) -> int:
    best = np.flatnonzero(x >= x.max() - rtol * abs(x.max()))
    return int(best[0]) if len(best) == 1 else int(rng.choice(best))


# ---------------------------------------------------------------- partition search

def balance_bounds(n: int, q: int) -> tuple[int, int]:
    centre, slack = n / q, 2 * math.sqrt(n / q)
    return max(0, math.ceil(centre - slack)), math.floor(centre + slack)


def within_edges(edges: np.ndarray, labels: np.ndarray) -> int:
    if len(edges) == 0:
        return 0
    return int(np.sum(labels[edges[:, 0]] == labels[edges[:, 1]]))


@dataclass
class SearchResult:
    labels: np.ndarray
    objective: int
    mode: str
    evaluations: int


def _exhaustive(g: GraphSample, q: int) -> SearchResult:
    n = g.n
    lo, hi = balance_bounds(n, q)
    best_lab, best_obj, best_spread = None, -1, math.inf
    digits = q ** np.arange(n - 1, -1, -1)
    total = q ** n
    chunk = 1 << 16
    for start in range(0, total, chunk):
        codes = np.arange(start, min(total, start + chunk))
        L = (codes[:, None] // digits[None, :]) % q
        sizes = np.stack([(L == c).sum(axis=1) for c in range(q)], axis=1)
        ok = np.all((sizes >= lo) & (sizes <= hi), axis=1)
        if not ok.any():
            continue
        if len(g.edges):
            obj = (L[:, g.edges[:, 0]] == L[:, g.edges[:, 1]]).sum(axis=1)
        else:
            obj = np.zeros(len(L), dtype=int)
        obj = np.where(ok, obj, -1)
        # ties go to the most balanced labeling (small n makes the size window very loose)
        spread = ((sizes - n / q) ** 2).sum(axis=1)
        key = np.lexsort((spread, -obj))
        i = int(key[0])
        if obj[i] > best_obj or (obj[i] == best_obj and spread[i] < best_spread):
            best_obj, best_spread, best_lab = int(obj[i]), float(spread[i]), L[i].copy()
    if best_lab is None:
        raise InvalidParams("no balanced labeling exists")
    return SearchResult(best_lab, best_obj, "exhaustive", total)


def _greedy_restart(A: csr_matrix, q: int, lo: int, hi: int, budget: int, rng):
    """Single-vertex moves to the label with most neighbours, within size bounds."""
    n = A.shape[0]
    labels = rng.permutation(np.arange(n) % q)
    sizes = np.bincount(labels, minlength=q)
    onehot = np.zeros((n, q))
    onehot[np.arange(n), labels] = 1
    counts = A @ onehot                         # neighbours of v per label
    indptr, indices = A.indptr, A.indices
    used, converged = 0, False
    while used < budget:
        moved = False
        for v in rng.permutation(n):
            if used >= budget:
                break
            used += 1
            cur = labels[v]
            if sizes[cur] <= lo:
                continue
            row = counts[v].copy()
            row[sizes >= hi] = -1
            row[cur] = counts[v, cur]
            new = int(np.argmax(row))
            if row[new] <= counts[v, cur]:
                continue
            nb = indices[indptr[v]:indptr[v + 1]]
            counts[nb, cur] -= 1
            counts[nb, new] += 1
            labels[v] = new
            sizes[cur] -= 1
            sizes[new] += 1
            moved = True
        if not moved:
            converged = True
            break
    obj = int(counts[np.arange(n), labels].sum() // 2)
    return labels, obj, used, converged


def search_good_partition(g: GraphSample, p: ModelParams, budget: int = 10 ** 6,
                          rng: RngLike = None, mode: str = "auto") -> SearchResult:
    """Balanced labeling with many within-community edges.

    ``mode`` is ``exhaustive`` (n <= 14), ``heuristic`` (random-restart
    greedy) or ``auto``. Heuristic restarts continue until the budget of
    single-vertex evaluations is used up.
    """
    n, q = g.n, p.q
    if mode == "auto":
        mode = "exhaustive" if n <= EXHAUSTIVE_MAX_N and q ** n <= 5 * 10 ** 6 else "heuristic"
    if mode == "exhaustive":
        if n > EXHAUSTIVE_MAX_N:
            raise TooLarge("exhaustive search limited to n <= 14")
        return _exhaustive(g, q)
    if n > HEURISTIC_MAX_N:
        raise TooLarge("heuristic search limited to n <= 10^4")
    rng = make_rng(rng)
    lo, hi = balance_bounds(n, q)
    A = g.adjacency
    best, best_obj, spent, any_converged = None, -1, 0, False
    while spent < budget:
        labels, obj, used, converged = _greedy_restart(A, q, lo, hi, budget - spent, rng)
        spent += used
        any_converged |= converged
        if obj > best_obj:
            best, best_obj = labels, obj
    if not any_converged:
        raise BudgetExceeded("budget ran out before any restart converged", best, best_obj)
    return SearchResult(best, best_obj, "heuristic", spent)


# ---------------------------------------------------------------- pipeline

def split_edges(g: GraphSample, rng) -> tuple[np.ndarray, np.ndarray]:
    coin = rng.random(g.m) < 0.5
    return g.edges[coin], g.edges[~coin]


@dataclass
class InefficientOutcome:
    labels: np.ndarray
    search_objective: int
    belief_level: float
    analytic_beta: float
    bp_flip_fraction: float


def recover_inefficient_details(g: GraphSample, p: ModelParams, budget: int = 10 ** 6,
                                rng: RngLike = None) -> InefficientOutcome:
    rng = make_rng(rng)
    n, q = g.n, p.q
    E1, E2 = split_edges(g, rng)
    g1 = g.with_edges(E1)
    try:
        res = search_good_partition(g1, p, budget, rng)
        tau, obj = res.labels, res.objective
    except BudgetExceeded as exc:
        tau, obj = exc.best, exc.objective
    beta = obj / len(E1) if len(E1) else 1.0 / q
    beta = min(max(beta, 1.0 / q), 1 - 1e-9)
    init = np.full((n, q), (1 - beta) / (q - 1))
    init[np.arange(n), tau] = beta
    lam = min(max(p.lam, 0.0), 1.0)
    g2 = g.with_edges(E2)
    labels = np.empty(n, dtype=np.int64)
    for v in range(n):
        nb = g2.neighbors(v)
        if len(nb) == 0:
            labels[v] = tau[v]
            continue
        labels[v] = argmax_uniform_ties(bp_step(init[nb], lam, q), rng)
    analytic = q ** (-2 / (p.d * p.lam)) if p.d * p.lam > 0 else 0.0
    return InefficientOutcome(labels, obj, beta, analytic, float(np.mean(labels != tau)))


def recover_inefficient(g: GraphSample, p: ModelParams, budget: int = 10 ** 6,
                        rng: RngLike = None) -> np.ndarray:
    return recover_inefficient_details(g, p, budget, rng).labels


def inefficient_trial_record(p: ModelParams, seed: int, budget: int = 10 ** 6) -> dict:
    rng = make_rng(seed)
    t0 = time.perf_counter()
    g = sample_sbm(p, rng)
    out = recover_inefficient_details(g, p, budget, rng)
    return {
        "seed": seed,
        "params": p.as_dict(),
        "regime": classify_regime(p).label,
        "k": None,
        "M": None,
        "alignment": alignment(out.labels, g.truth, p.q),
        "fraction_multi_candidate": None,
        "fraction_zero_candidate": None,
        "wall_time_ms": 1000 * (time.perf_counter() - t0),
        "search_objective": out.search_objective,
        "analytic_beta": out.analytic_beta,
        "bp_flip_fraction": out.bp_flip_fraction,
    }


# ---------------------------------------------------------------- broadcast tree

@dataclass(frozen=True)
class BroadcastTree:
    root_label: int
    child_labels: np.ndarray

    @property
    def n_children(self) -> int:
        return len(self.child_labels)

    @property
    def same_label_children(self) -> int:
        return int(np.sum(self.child_labels == self.root_label))


def sample_broadcast_tree(d: float, lam: float, q: int, n: int, rng: RngLike = None,
                          root_label: Optional[int] = None) -> BroadcastTree:
    """Depth-1 labeled tree matching the local law of an SBM neighbourhood."""
    rng = make_rng(rng)
    root = int(rng.integers(q)) if root_label is None else int(root_label)
    C = int(rng.binomial(n - 1, d / n))
    p_same = 1.0 / q + lam * (q - 1) / q
    same = rng.random(C) < p_same
    others = rng.integers(0, q - 1, size=C)
    others = others + (others >= root)
    return BroadcastTree(root, np.where(same, root, others))
