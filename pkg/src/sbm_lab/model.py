"""Model parameters, regime classification, graph samplers and the alignment metric.

Vertices are ``0..n-1`` and community labels are ``0..q-1``. A labeling is a
plain integer numpy array; ``-1`` marks an unassigned vertex.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import cached_property
from itertools import permutations
from typing import Iterable, Optional, Sequence, Union

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.sparse import csr_matrix

from .errors import InvalidParams, LabelOutOfRange, NegativeRate, SizeMismatch

UNASSIGNED = -1
RngLike = Union[None, int, np.random.Generator]


def make_rng(seed: RngLike) -> np.random.Generator:
    """Counter-based generator (Philox) from an int seed, or pass a Generator through."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.Philox(seed))


def _seed_of(rng: RngLike) -> int:
    return int(rng) if isinstance(rng, (int, np.integer)) else -1


# ---------------------------------------------------------------- parameters

def invert_params(d: float, lam: float, q: int) -> tuple[float, float]:
    """(d, lambda, q) -> (a, b)."""
    if q < 2:
        raise InvalidParams("q must be at least 2")
    if lam < -1.0 / (q - 1) or lam > 1:
        raise NegativeRate(f"lambda={lam} outside [-1/(q-1), 1]")
    return d * (1 + (q - 1) * lam), d * (1 - lam)


def forward_params(a: float, b: float, q: int) -> tuple[float, float]:
    """(a, b, q) -> (d, lambda). lambda is 0 when d == 0."""
    d = (a + (q - 1) * b) / q
    lam = (a - b) / (a + (q - 1) * b) if d > 0 else 0.0
    return d, lam


@dataclass(frozen=True)
class ModelParams:
    n: int
    q: int
    a: float
    b: float

    def __post_init__(self):
        if self.n < 1:
            raise InvalidParams("n must be positive")
        if self.q < 2:
            raise InvalidParams("q must be at least 2")
        if self.a < 0 or self.b < 0:
            raise NegativeRate("rates must be nonnegative")
        if self.a > self.n or self.b > self.n:
            raise InvalidParams("edge probabilities a/n, b/n must be at most 1")

    @classmethod
    def from_dl(cls, n: int, q: int, d: float, lam: float) -> "ModelParams":
        a, b = invert_params(d, lam, q)
        return cls(n, q, a, b)

    @property
    def d(self) -> float:
        return (self.a + (self.q - 1) * self.b) / self.q

    @property
    def lam(self) -> float:
        return forward_params(self.a, self.b, self.q)[1]

    @property
    def s(self) -> float:
        return (self.a - self.b) / self.q

    @property
    def chi(self) -> float:
        return math.log(self.q) / math.log(self.n) if self.n > 1 else math.inf

    @property
    def d_circ(self) -> float:
        n, q, a, b = self.n, self.q, self.a, self.b
        return (a * (1 - a / n) + (q - 1) * b * (1 - b / n)) / q

    @property
    def lam_circ(self) -> float:
        dc = self.d_circ
        return (self.a - self.b) / (self.q * dc) if dc > 0 else 0.0

    @property
    def xi(self) -> float:
        n, a, b = self.n, self.a, self.b
        dc = self.d_circ
        return min(a * (1 - a / n), b * (1 - b / n)) / dc if dc > 0 else 0.0

    @property
    def ks_snr(self) -> float:
        return self.d * self.lam ** 2

    @property
    def modified_snr(self) -> float:
        chi = self.chi
        if not math.isfinite(chi) or chi <= 0:
            return 0.0
        return self.d * abs(self.lam) ** (1.0 / chi)

    def as_dict(self) -> dict:
        return {"n": self.n, "q": self.q, "a": self.a, "b": self.b,
                "d": self.d, "lambda": self.lam}


# ---------------------------------------------------------------- regimes

class RegimeKind(str, enum.Enum):
    ABOVE_KS = "AboveKS"
    BELOW_KS_ABOVE_MODIFIED = "BelowKSAboveModified"
    BELOW_BOTH = "BelowBoth"
    # Kept for schema compatibility; classify_regime never returns it.
    SUPERCRITICAL = "Supercritical"


@dataclass(frozen=True)
class Regime:
    kind: RegimeKind
    ks_snr: float
    modified_snr: float
    it_impossible: bool  # d*lambda < 1

    @property
    def label(self) -> str:
        return self.kind.value


def classify_regime(p: ModelParams) -> Regime:
    ks, mod = p.ks_snr, p.modified_snr
    if ks > 1:
        kind = RegimeKind.ABOVE_KS
    elif mod > 1:
        kind = RegimeKind.BELOW_KS_ABOVE_MODIFIED
    else:
        kind = RegimeKind.BELOW_BOTH
    return Regime(kind, ks, mod, p.d * p.lam < 1)


# ---------------------------------------------------------------- graphs

class ModelTag(str, enum.Enum):
    SBM = "SBM"
    TILDE_SBM = "TildeSBM"
    ER = "ER"


def _canonical_edges(edges) -> np.ndarray:
    e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if len(e) == 0:
        return np.empty((0, 2), dtype=np.int64)
    e = np.sort(e, axis=1)
    if np.any(e[:, 0] == e[:, 1]):
        raise InvalidParams("self-loops are not allowed")
    return np.unique(e, axis=0)


@dataclass(frozen=True, eq=False)
class GraphSample:
    """Undirected simple graph plus its hidden labeling.

    ``edges`` is an (m, 2) array of sorted pairs ``u < v`` in lexicographic
    order. ``truth`` is an integer array of length n, all ``-1`` for ER.
    """

    n: int
    q: int
    edges: np.ndarray
    truth: np.ndarray
    model_tag: ModelTag = ModelTag.SBM
    seed: int = -1

    def __post_init__(self):
        object.__setattr__(self, "edges", _canonical_edges(self.edges))
        truth = np.asarray(self.truth, dtype=np.int64)
        if truth.shape != (self.n,):
            raise InvalidParams("truth must have one entry per vertex")
        object.__setattr__(self, "truth", truth)
        if len(self.edges) and self.edges.max() >= self.n:
            raise InvalidParams("edge endpoint out of range")
        self.edges.setflags(write=False)
        self.truth.setflags(write=False)

    @classmethod
    def from_edges(cls, n, edges, truth=None, q=2, model_tag=ModelTag.SBM, seed=-1):
        if truth is None:
            truth = np.full(n, UNASSIGNED)
        return cls(n, q, np.asarray(list(edges) or np.empty((0, 2))), truth, ModelTag(model_tag), seed)

    @property
    def m(self) -> int:
        return len(self.edges)

    @cached_property
    def adjacency(self) -> csr_matrix:
        n = self.n
        u, v = self.edges[:, 0], self.edges[:, 1]
        data = np.ones(2 * self.m)
        A = csr_matrix((data, (np.r_[u, v], np.r_[v, u])), shape=(n, n))
        A.sort_indices()
        return A

    @cached_property
    def degrees(self) -> np.ndarray:
        return np.diff(self.adjacency.indptr)

    def neighbors(self, v: int) -> np.ndarray:
        A = self.adjacency
        return A.indices[A.indptr[v]:A.indptr[v + 1]]

    def has_edge(self, u: int, v: int) -> bool:
        nb = self.neighbors(u)
        i = np.searchsorted(nb, v)
        return bool(i < len(nb) and nb[i] == v)

    # text format: "n q model seed", n lines "v label", then "u v" per edge
    def to_text(self) -> str:
        lines = [f"{self.n} {self.q} {self.model_tag.value} {self.seed}"]
        lines += [f"{v} {int(l)}" for v, l in enumerate(self.truth)]
        lines += [f"{u} {v}" for u, v in self.edges]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "GraphSample":
        rows = text.strip().splitlines()
        n, q, tag, seed = rows[0].split()
        n = int(n)
        truth = np.empty(n, dtype=np.int64)
        for line in rows[1:n + 1]:
            v, lab = line.split()
            truth[int(v)] = int(lab)
        edges = [tuple(map(int, line.split())) for line in rows[n + 1:] if line.strip()]
        return cls(n, int(q), np.asarray(edges, dtype=np.int64).reshape(-1, 2), truth,
                   ModelTag(tag), int(seed))

    def with_edges(self, edges) -> "GraphSample":
        return GraphSample(self.n, self.q, edges, self.truth, self.model_tag, self.seed)


def _pair_from_index(t: np.ndarray, N: int) -> tuple[np.ndarray, np.ndarray]:
    """Map linear indices into the strict upper triangle of an N x N matrix to (i, j)."""
    t = np.asarray(t, dtype=np.int64)
    total = N * (N - 1) // 2
    i = N - 2 - np.floor(np.sqrt(-8.0 * t + 4.0 * N * (N - 1) - 7) / 2.0 - 0.5).astype(np.int64)
    # float rounding can be off by one near row boundaries; fix it exactly
    start = lambda r: total - (N - r) * (N - r - 1) // 2
    i = np.where(start(i) > t, i - 1, i)
    i = np.where(start(i + 1) <= t, i + 1, i)
    j = t - start(i) + i + 1
    return i, j


def _sample_pairs(N: int, p: float, rng: np.random.Generator) -> np.ndarray:
    """Each of the C(N,2) pairs of range(N) independently with probability p."""
    total = N * (N - 1) // 2
    if total == 0 or p <= 0:
        return np.empty((0, 2), dtype=np.int64)
    if p >= 1:
        idx = np.arange(total)
    else:
        m = int(rng.binomial(total, p))
        idx = rng.choice(total, size=m, replace=False) if m else np.empty(0, np.int64)
    i, j = _pair_from_index(np.sort(idx), N)
    return np.stack([i, j], axis=1)


def _block_graph(labels: np.ndarray, q: int, p_in: float, p_out: float,
                 rng: np.random.Generator) -> np.ndarray:
    """Edges of a block model with the given labels and within/across probabilities."""
    n = len(labels)
    if p_in >= p_out:
        base = _sample_pairs(n, p_out, rng)
        extra_p = 0.0 if p_out >= 1 else (p_in - p_out) / (1 - p_out)
        parts = [base]
        if extra_p > 0:
            for c in range(q):
                members = np.flatnonzero(labels == c)
                e = _sample_pairs(len(members), extra_p, rng)
                parts.append(members[e])
        edges = np.concatenate(parts) if parts else base
    else:
        # thin same-label pairs of a dense-enough base graph
        base = _sample_pairs(n, p_out, rng)
        same = labels[base[:, 0]] == labels[base[:, 1]]
        keep = ~same | (rng.random(len(base)) < p_in / p_out)
        edges = base[keep]
    return _canonical_edges(edges)


def sample_sbm(p: ModelParams, rng: RngLike = None) -> GraphSample:
    seed = _seed_of(rng)
    rng = make_rng(rng)
    labels = rng.integers(0, p.q, size=p.n)
    edges = _block_graph(labels, p.q, p.a / p.n, p.b / p.n, rng)
    return GraphSample(p.n, p.q, edges, labels, ModelTag.SBM, seed)


def sample_tilde_sbm(n_prime: int, sizes: Sequence[int], a_over_n: float, b_over_n: float,
                     rng: RngLike = None) -> GraphSample:
    sizes = [int(s) for s in sizes]
    if sum(sizes) != n_prime or any(s < 0 for s in sizes):
        raise SizeMismatch(f"sizes sum to {sum(sizes)}, expected {n_prime}")
    seed = _seed_of(rng)
    rng = make_rng(rng)
    labels = rng.permutation(np.repeat(np.arange(len(sizes)), sizes))
    edges = _block_graph(labels, len(sizes), a_over_n, b_over_n, rng)
    return GraphSample(n_prime, max(len(sizes), 1), edges, labels, ModelTag.TILDE_SBM, seed)


def sample_er(n: int, d: float, rng: RngLike = None, q: int = 1) -> GraphSample:
    if not 0 <= d <= n:
        raise InvalidParams("need 0 <= d/n <= 1")
    seed = _seed_of(rng)
    rng = make_rng(rng)
    edges = _sample_pairs(n, d / n, rng)
    return GraphSample(n, q, edges, np.full(n, UNASSIGNED), ModelTag.ER, seed)


# ---------------------------------------------------------------- alignment

def _check_labels(x, q) -> np.ndarray:
    x = np.asarray(x, dtype=np.int64)
    if x.size and (x.min() < 0 or x.max() >= q):
        raise LabelOutOfRange(f"labels must lie in 0..{q - 1}")
    return x


def confusion_matrix(sigma, tau, q: int) -> np.ndarray:
    sigma, tau = _check_labels(sigma, q), _check_labels(tau, q)
    if sigma.shape != tau.shape:
        raise InvalidParams("labelings differ in length")
    return np.bincount(sigma * q + tau, minlength=q * q).reshape(q, q)


def alignment(sigma, tau, q: int) -> float:
    """max over label permutations of the fraction of agreeing vertices."""
    C = confusion_matrix(sigma, tau, q)
    n = C.sum()
    if n == 0:
        return 1.0
    rows, cols = linear_sum_assignment(C, maximize=True)
    return float(C[rows, cols].sum() / n)


def alignment_bruteforce(sigma, tau, q: int) -> float:
    """O(q!) reference implementation; only for small q."""
    C = confusion_matrix(sigma, tau, q)
    n = C.sum()
    best = max(sum(C[i, pi[i]] for i in range(q)) for pi in permutations(range(q)))
    return best / n if n else 1.0


def alignment_weight(x: int, y: int, q: int) -> float:
    return q * float(x == y) - 1.0


def random_labeling(n: int, q: int, rng: RngLike = None) -> np.ndarray:
    return make_rng(rng).integers(0, q, size=n)
