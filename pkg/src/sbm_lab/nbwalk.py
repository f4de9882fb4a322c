"""Weighted non-backtracking walk sums with centered edge weights.

Every ordered pair of distinct vertices carries the weight
``W[y, z] = 1{yz is an edge} - d/n``. A walk's value is the product of its
step weights. Walks may start at any vertex and may end at any vertex, but
interior vertices must stay outside the ``avoid`` set.

The fast path keeps one message per directed graph edge and represents the
messages along the ~n^2 non-edges by two vertex-indexed vectors (they share
the constant weight ``-d/n``). Each step is a handful of sparse products, so
one call costs O((m + n) k) per start vector.
"""

from __future__ import annotations

import enum
import io
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Optional

import numpy as np
from scipy.sparse import csr_matrix

from .errors import BadLength, SBMLabError, TooLarge
from .model import GraphSample

MAX_K = 200
_OVERFLOW = 1e280


class WalkOverflow(SBMLabError, FloatingPointError):
    pass


class WalkKind(str, enum.Enum):
    NON_BACKTRACKING = "NonBacktracking"
    SELF_AVOIDING_ORACLE = "SelfAvoidingOracle"


def _avoid_mask(n: int, avoid) -> np.ndarray:
    mask = np.zeros(n, dtype=bool)
    if avoid is None:
        return mask
    if isinstance(avoid, np.ndarray) and avoid.dtype == bool:
        return avoid.copy()
    idx = np.fromiter(avoid, dtype=np.int64) if not isinstance(avoid, np.ndarray) else avoid
    mask[np.asarray(idx, dtype=np.int64)] = True
    return mask


class WeightOperator:
    """x -> Wx with avoided rows and columns zeroed; never materializes W."""

    def __init__(self, g: GraphSample, d: float, avoid=None):
        self.g, self.d, self.n = g, float(d), g.n
        self.allowed = ~_avoid_mask(g.n, avoid)

    def apply(self, x: np.ndarray) -> np.ndarray:
        c = self.d / self.n
        xs = np.where(self.allowed, x, 0.0)
        y = self.g.adjacency @ xs - c * (xs.sum() - xs)
        return np.where(self.allowed, y, 0.0)

    def dense(self) -> np.ndarray:
        W = _dense_weights(self.g, self.d)
        W[~self.allowed, :] = 0
        W[:, ~self.allowed] = 0
        return W


def _dense_weights(g: GraphSample, d: float) -> np.ndarray:
    n = g.n
    W = np.full((n, n), -d / n)
    if g.m:
        u, v = g.edges[:, 0], g.edges[:, 1]
        W[u, v] = W[v, u] = 1 - d / n
    np.fill_diagonal(W, 0.0)
    return W


class _EdgeIndex:
    """Directed-edge bookkeeping for one graph."""

    def __init__(self, g: GraphSample):
        A = g.adjacency
        n = g.n
        self.A = A
        self.src = np.repeat(np.arange(n), np.diff(A.indptr))
        self.dst = A.indices.astype(np.int64)
        # CSR order is sorted by (src, dst); sorting by (dst, src) lists reverses in CSR order
        self.rev = np.lexsort((self.src, self.dst))
        ne = len(self.dst)
        # row z of `incoming` sums the messages of edges y -> z
        self.incoming = csr_matrix((np.ones(ne), (self.dst, np.arange(ne))), shape=(n, ne))


def _edge_index(g: GraphSample) -> _EdgeIndex:
    cache = g.__dict__.setdefault("_nbw_edge_index", None)
    if cache is None:
        cache = _EdgeIndex(g)
        g.__dict__["_nbw_edge_index"] = cache
    return cache


def nbw_matrix(g: GraphSample, X: np.ndarray, k: int, d: float, avoid=None) -> np.ndarray:
    """Column j of the result is sum_u X[u, j] * N_{u, .} for walks of length k.

    Walk sums are linear in the start vector, so one call handles any
    superposition of sources (e.g. all neighbours of a representative).
    """
    if k < 1:
        raise BadLength("walk length must be at least 1")
    if k > MAX_K:
        raise BadLength(f"walk length capped at {MAX_K}")
    n = g.n
    X = np.asarray(X, dtype=float)
    squeeze = X.ndim == 1
    if squeeze:
        X = X[:, None]
    allowed = ~_avoid_mask(n, avoid)
    S = allowed.astype(float)[:, None]
    nS = allowed.sum()
    c = d / n
    ei = _edge_index(g)
    A = ei.A
    nbr_S = (A @ allowed.astype(float))[:, None]          # |N(z) ∩ S|
    count_S = nS - S - nbr_S                               # non-neighbours y != z in S

    a_prev = X.copy()                                      # a_{t-1}
    F = np.zeros_like(X)
    G = np.zeros_like(X)
    mu = np.zeros((len(ei.dst), X.shape[1]))               # edge messages mu_{t-1}
    for t in range(1, k + 1):
        # edge messages y -> z
        nu = (1 - c) * (a_prev[ei.src] - mu[ei.rev])
        edge_in = ei.incoming @ nu
        # non-edge messages: -c a(y) + c 1_S(y) F(z) + c 1_S(y) 1_S(z) G(y)
        GS = S * G
        t1 = -c * (a_prev.sum(0) - a_prev - A @ a_prev)
        t2 = c * F * count_S
        t3 = c * S * (GS.sum(0) - GS - A @ GS)
        arrival = edge_in + t1 + t2 + t3
        if t < k:
            mu = nu * S[ei.dst]
            a_new = arrival * S
            F, G = -c * a_prev + c * S * G, c * F
            a_prev = a_new
            if np.abs(a_prev).max(initial=0.0) > _OVERFLOW:
                raise WalkOverflow(f"walk sums overflow at step {t}")
        else:
            a_prev = arrival
    if not np.all(np.isfinite(a_prev)):
        raise WalkOverflow("non-finite walk sums")
    return a_prev[:, 0] if squeeze else a_prev


@dataclass(frozen=True, eq=False)
class WalkStatVector:
    source: int
    k: int
    values: np.ndarray
    kind: WalkKind = WalkKind.NON_BACKTRACKING

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# source={self.source} k={self.k} kind={self.kind.value}\n")
        buf.write("target,value\n")
        for v, x in enumerate(self.values):
            buf.write(f"{v},{float(x)!r}\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "WalkStatVector":
        lines = text.strip().splitlines()
        meta = dict(kv.split("=") for kv in lines[0].lstrip("# ").split())
        vals = [float(line.split(",")[1]) for line in lines[2:]]
        return cls(int(meta["source"]), int(meta["k"]), np.array(vals), WalkKind(meta["kind"]))


def nbw_vector(g: GraphSample, u: int, k: int, d: float, avoid=None) -> WalkStatVector:
    x = np.zeros(g.n)
    x[u] = 1.0
    return WalkStatVector(u, k, nbw_matrix(g, x, k, d, avoid))


# ---------------------------------------------------------------- oracles

def _walk_oracle(g, u, k, d, avoid, self_avoiding) -> np.ndarray:
    n = g.n
    if n > 12 or k > 7:
        raise TooLarge("brute-force enumeration limited to n <= 12, k <= 7")
    if k < 1:
        raise BadLength("walk length must be at least 1")
    W = _dense_weights(g, d)
    banned = _avoid_mask(n, avoid)
    paths = np.array([[u]], dtype=np.int64)
    vals = np.array([1.0])
    for t in range(1, k + 1):
        P = np.repeat(paths, n, axis=0)
        z = np.tile(np.arange(n), len(paths))
        X = np.repeat(vals, n) * W[P[:, -1], z]
        ok = z != P[:, -1]
        if self_avoiding:
            ok &= ~np.any(P == z[:, None], axis=1)
        elif P.shape[1] >= 2:
            ok &= z != P[:, -2]
        if t < k:
            ok &= ~banned[z]
        ok &= X != 0
        paths = np.concatenate([P[ok], z[ok, None]], axis=1)
        vals = X[ok]
    # exact-rounding accumulation per target keeps the oracle trustworthy
    order = np.argsort(paths[:, -1], kind="stable")
    ends, vals = paths[order, -1], vals[order]
    cuts = np.searchsorted(ends, np.arange(n + 1))
    return np.array([math.fsum(vals[cuts[v]:cuts[v + 1]]) for v in range(n)])


def nbw_bruteforce_vector(g: GraphSample, u: int, k: int, d: float, avoid=None) -> np.ndarray:
    return _walk_oracle(g, u, k, d, avoid, self_avoiding=False)


def nbw_bruteforce(g: GraphSample, u: int, v: int, k: int, d: float, avoid=None) -> float:
    """Explicit enumeration of every non-backtracking walk (test oracle)."""
    return float(_walk_oracle(g, u, k, d, avoid, self_avoiding=False)[v])


def saw_bruteforce(g: GraphSample, u: int, v: int, k: int, d: float, avoid=None) -> float:
    """Same sum restricted to self-avoiding walks."""
    if u == v:
        return 0.0
    return float(_walk_oracle(g, u, k, d, avoid, self_avoiding=True)[v])


# ---------------------------------------------------------------- Z statistic

def z_statistics(g: GraphSample, reps: Iterable[int], part, k: int, d: float) -> np.ndarray:
    """Column l holds Z(w, reps[l]) for every target w.

    Sources are the neighbours of each representative inside ``part``;
    walks avoid everything outside ``part`` except at their endpoints.
    """
    in_part = _avoid_mask(g.n, part)
    reps = list(reps)
    X = np.zeros((g.n, len(reps)))
    for j, r in enumerate(reps):
        nb = g.neighbors(r)
        X[nb[in_part[nb]], j] = 1.0
    if not reps:
        return X
    return nbw_matrix(g, X, k, d, avoid=~in_part)


def z_statistic(g: GraphSample, w: int, rep: int, part, k: int, d: float) -> float:
    return float(z_statistics(g, [rep], part, k, d)[w, 0])
