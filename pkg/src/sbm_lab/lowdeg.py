"""Low-degree correlation audit for the same-community indicator.

The target is x = 1{sigma_0 = sigma_1} - 1/q for the two special vertices 0
and 1. Indices are edge sets on vertices 0..n-1 (``PolyIndex``); labeled
indices pair an edge set with labels on its support.

Three layers live here:

* closed-form pieces: c and M entries, informative sets, f(alpha), and the
  recursive vector u whose norm bounds the degree-D correlation;
* an exact enumeration ensemble over all (graph, labeling) pairs, used both as
  an oracle for those closed forms and to compute the true degree-D
  correlation on tiny instances;
* the closed-form bound report and the graphon-estimation lower bound.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from functools import cached_property, lru_cache
from typing import Dict, Iterable, Optional, Tuple

import numpy as np

from .errors import RangeError, TooLarge
from .model import ModelParams

SPECIAL = (0, 1)
Pair = Tuple[int, int]


# ---------------------------------------------------------------- indices

@dataclass(frozen=True)
class PolyIndex:
    edges: frozenset

    def __post_init__(self):
        canon = frozenset((min(e), max(e)) for e in self.edges)
        if any(i == j for i, j in canon):
            raise ValueError("self-loop in index")
        object.__setattr__(self, "edges", canon)

    @classmethod
    def of(cls, *pairs: Pair) -> "PolyIndex":
        return cls(frozenset(pairs))

    def __len__(self) -> int:
        return len(self.edges)

    def __le__(self, other: "PolyIndex") -> bool:
        return self.edges <= other.edges

    def __lt__(self, other: "PolyIndex") -> bool:
        return self.edges < other.edges

    def __sub__(self, other: "PolyIndex") -> "PolyIndex":
        return PolyIndex(self.edges - other.edges)

    @cached_property
    def vertices(self) -> tuple:
        return tuple(sorted({v for e in self.edges for v in e}))

    @cached_property
    def degree(self) -> dict:
        deg: dict = {}
        for i, j in self.edges:
            deg[i] = deg.get(i, 0) + 1
            deg[j] = deg.get(j, 0) + 1
        return deg

    @cached_property
    def components(self) -> list:
        """Connected components (as vertex sets) of the graph on V(alpha)."""
        parent = {v: v for v in self.vertices}

        def find(v):
            while parent[v] != v:
                parent[v] = parent[parent[v]]
                v = parent[v]
            return v

        for i, j in self.edges:
            parent[find(i)] = find(j)
        groups: dict = {}
        for v in self.vertices:
            groups.setdefault(find(v), set()).add(v)
        return list(groups.values())

    @property
    def connected(self) -> bool:
        return len(self.components) <= 1

    @property
    def excess(self) -> int:
        """|alpha| - |V(alpha)| + 1."""
        return len(self.edges) - len(self.vertices) + 1

    def sorted_edges(self) -> list:
        return sorted(self.edges)


EMPTY = PolyIndex(frozenset())


def is_informative(alpha: PolyIndex) -> bool:
    if not alpha.edges:
        return True
    V = set(alpha.vertices)
    if not set(SPECIAL) <= V:
        return False
    if any(alpha.degree[v] < 2 for v in V - set(SPECIAL)):
        return False
    return alpha.connected


def all_pairs(n: int) -> list:
    return list(itertools.combinations(range(n), 2))


def indices_up_to(n: int, D: int) -> list:
    pairs = all_pairs(n)
    return [PolyIndex(frozenset(c)) for r in range(D + 1) for c in itertools.combinations(pairs, r)]


def informative_indices(n: int, D: int) -> list:
    return [a for a in indices_up_to(n, D) if is_informative(a)]


def proper_subindices(alpha: PolyIndex) -> Iterable[PolyIndex]:
    edges = alpha.sorted_edges()
    for r in range(len(edges)):
        for c in itertools.combinations(edges, r):
            yield PolyIndex(frozenset(c))


@lru_cache(maxsize=None)
def _f(alpha: PolyIndex) -> int:
    if not alpha.edges:
        return 1
    return sum(_f(b) for b in proper_subindices(alpha) if is_informative(b))


def f_complexity(alpha: PolyIndex) -> int:
    """f(empty) = 1 and f(alpha) = sum of f over informative proper sub-indices."""
    if len(alpha) > 8:
        raise TooLarge("f_complexity limited to |alpha| <= 8")
    return _f(alpha)


def f_bound(alpha: PolyIndex) -> float:
    if not alpha.edges:
        return 1.0
    return float((2 * len(alpha)) ** alpha.excess)


# ---------------------------------------------------------------- closed forms

def c_entry(alpha: PolyIndex, p: ModelParams) -> float:
    """E[phi_alpha * x] for informative alpha (0 for the empty index)."""
    if not alpha.edges:
        return 0.0
    return (p.q - 1) * p.q ** (-len(alpha.vertices)) * ((p.a - p.b) / p.n) ** len(alpha)


def labelings(beta: PolyIndex, q: int) -> Iterable[tuple]:
    return itertools.product(range(q), repeat=len(beta.vertices))


def monochromatic(beta: PolyIndex, gamma: tuple) -> int:
    lab = dict(zip(beta.vertices, gamma))
    return sum(1 for i, j in beta.edges if lab[i] == lab[j])


def agreement_probability(alpha: PolyIndex, beta: PolyIndex, gamma: tuple, q: int) -> float:
    """P(every edge of alpha - beta is monochromatic | labels gamma on V(beta))."""
    lab = dict(zip(beta.vertices, gamma))
    rest = alpha - beta
    exponent = 0
    for comp in rest.components:
        anchors = {lab[v] for v in comp if v in lab}
        if len(anchors) > 1:
            return 0.0
        free = sum(1 for v in comp if v not in lab)
        exponent += free if anchors else free - 1
    return float(q) ** (-exponent)


def m_entry(beta: PolyIndex, gamma: tuple, alpha: PolyIndex, p: ModelParams) -> float:
    """E[phi_alpha * psi_{beta, gamma}] in closed form; zero unless beta <= alpha."""
    if not beta <= alpha:
        return 0.0
    n, q = p.n, p.q
    pa, pb = p.a / n, p.b / n
    ell = monochromatic(beta, gamma)
    val = q ** (-len(beta.vertices) / 2)
    val *= (pa * (1 - pa)) ** (ell / 2) * (pb * (1 - pb)) ** ((len(beta) - ell) / 2)
    val *= ((p.a - p.b) / n) ** (len(alpha) - len(beta))
    return val * agreement_probability(alpha, beta, gamma, q)


def gram_denominator(alpha: PolyIndex, p: ModelParams) -> float:
    return math.fsum(m_entry(alpha, g, alpha, p) ** 2 for g in labelings(alpha, p.q))


def gram_lower_bound(alpha: PolyIndex, p: ModelParams) -> float:
    n, q = p.n, p.q
    V = len(alpha.vertices)
    first = (p.d_circ / n) ** len(alpha) * p.xi ** alpha.excess
    second = (p.a / n * (1 - p.a / n)) ** len(alpha) * float(q) ** (-V + 1)
    return max(first, second)


def d_bound(alpha: PolyIndex, p: ModelParams) -> float:
    return (float(p.q) ** (-len(alpha.vertices) + 1)
            * (abs(p.a - p.b) / p.n) ** len(alpha) * f_complexity(alpha))


# ---------------------------------------------------------------- u recursion

@dataclass
class UConstruction:
    D: int
    n: int
    params: ModelParams
    alphas: list
    u: Dict[Tuple[PolyIndex, tuple], float]
    d: Dict[PolyIndex, float]
    denominators: Dict[PolyIndex, float]

    @property
    def norm2(self) -> float:
        return math.fsum(v * v for v in self.u.values())

    @property
    def ex2(self) -> float:
        q = self.params.q
        return (1 / q) * (1 - 1 / q)

    @property
    def corr_upper(self) -> float:
        """||u|| / sqrt(E[x^2]), an upper bound on the degree-D correlation."""
        return math.sqrt(self.norm2 / self.ex2)

    def constraint_value(self, alpha: PolyIndex) -> float:
        """sum over stored (beta, gamma) of u * M(beta gamma, alpha)."""
        p = self.params
        return math.fsum(val * m_entry(b, g, alpha, p)
                         for (b, g), val in self.u.items() if b <= alpha and val != 0.0)

    def residuals(self, alphas: Optional[Iterable[PolyIndex]] = None) -> Dict[PolyIndex, float]:
        alphas = self.alphas if alphas is None else alphas
        return {a: self.constraint_value(a) - c_entry_general(a, self.params) for a in alphas}


def c_entry_general(alpha: PolyIndex, p: ModelParams) -> float:
    """E[phi_alpha * x] for any index, informative or not.

    Given the labels, each factor of phi_alpha has mean (a-b)/n on
    monochromatic edges and 0 otherwise, so only the label average remains.
    """
    if not alpha.edges:
        return 0.0
    q = p.q
    verts = sorted(set(alpha.vertices) | set(SPECIAL))
    pos = {v: i for i, v in enumerate(verts)}
    terms = []
    for lab in itertools.product(range(q), repeat=len(verts)):
        if all(lab[pos[i]] == lab[pos[j]] for i, j in alpha.edges):
            terms.append((lab[pos[0]] == lab[pos[1]]) - 1 / q)
    return math.fsum(terms) / q ** len(verts) * ((p.a - p.b) / p.n) ** len(alpha)


def build_u(D: int, n: int, p: ModelParams) -> UConstruction:
    if n > 6 or D > 4:
        raise TooLarge("build_u limited to n <= 6 and D <= 4")
    if p.n != n:
        p = ModelParams(n, p.q, p.a, p.b)
    alphas = informative_indices(n, D)
    alphas.sort(key=len)
    u: dict = {}
    dvals: dict = {EMPTY: 0.0}
    denoms: dict = {}
    for alpha in alphas:
        if not alpha.edges:
            continue
        acc = [c_entry(alpha, p)]
        for beta in proper_subindices(alpha):
            if not beta.edges or beta not in dvals:
                continue
            for gamma in labelings(beta, p.q):
                val = u.get((beta, gamma), 0.0)
                if val:
                    acc.append(-val * m_entry(beta, gamma, alpha, p))
        d_alpha = math.fsum(acc)
        dvals[alpha] = d_alpha
        diag = {g: m_entry(alpha, g, alpha, p) for g in labelings(alpha, p.q)}
        denom = math.fsum(v * v for v in diag.values())
        denoms[alpha] = denom
        for g, m in diag.items():
            u[(alpha, g)] = m * d_alpha / denom if denom > 0 else 0.0
    return UConstruction(D, n, p, alphas, u, dvals, denoms)


# ---------------------------------------------------------------- exact ensemble

def _neumaier(chunks: Iterable[np.ndarray]) -> np.ndarray:
    """Compensated elementwise sum over a fixed-order sequence of arrays."""
    total = comp = None
    for x in chunks:
        if total is None:
            total, comp = x.astype(float).copy(), np.zeros_like(x, dtype=float)
            continue
        t = total + x
        big = np.abs(total) >= np.abs(x)
        comp += np.where(big, (total - t) + x, (x - t) + total)
        total = t
    return total + comp


class ExactEnsemble:
    """All graphs on n vertices and all labelings, with exact probabilities.

    ``weights[l, g]`` is P(sigma = labelings[l]) * P(Y = graphs[g] | sigma).
    """

    def __init__(self, n: int, q: int, a: float, b: float, limit: float = 1e8):
        N = n * (n - 1) // 2
        if 2.0 ** N * q ** n > limit:
            raise TooLarge("exact enumeration exceeds 2^C(n,2) * q^n <= 1e8")
        self.n, self.q, self.a, self.b = n, q, a, b
        self.pairs = all_pairs(n)
        self.pair_index = {e: i for i, e in enumerate(self.pairs)}
        codes = np.arange(2 ** N)
        self.graphs = ((codes[:, None] >> np.arange(N)[None, :]) & 1).astype(np.int8)
        self.labelings = np.array(list(itertools.product(range(q), repeat=n)), dtype=np.int64)
        I = np.array([e[0] for e in self.pairs], dtype=np.int64)
        J = np.array([e[1] for e in self.pairs], dtype=np.int64)
        self.same = self.labelings[:, I] == self.labelings[:, J] if N else np.zeros((len(self.labelings), 0), bool)
        self.edge_prob = np.where(self.same, a / n, b / n)

    @cached_property
    def weights(self) -> np.ndarray:
        Y = self.graphs.astype(bool)
        L = len(self.labelings)
        out = np.empty((L, len(Y)))
        for l in range(L):
            pe = self.edge_prob[l]
            out[l] = np.prod(np.where(Y, pe, 1 - pe), axis=1)
        return out / L

    @cached_property
    def x(self) -> np.ndarray:
        return (self.labelings[:, 0] == self.labelings[:, 1]) - 1.0 / self.q

    def expect(self, F: np.ndarray) -> float:
        """E[F] for F broadcastable to (labelings, graphs)."""
        W = self.weights
        F = np.broadcast_to(F, W.shape)
        chunks = [(W[i:i + 64] * F[i:i + 64]).sum(axis=0) for i in range(0, len(W), 64)]
        return float(math.fsum(_neumaier(chunks)))

    def phi(self, alpha: PolyIndex) -> np.ndarray:
        out = np.ones(len(self.graphs))
        for e in alpha.edges:
            out = out * (self.graphs[:, self.pair_index[e]] - self.b / self.n)
        return out[None, :]

    def psi(self, beta: PolyIndex, gamma: tuple) -> np.ndarray:
        n, q = self.n, self.q
        lab = self.labelings
        match = np.ones(len(lab), dtype=bool)
        for v, g in zip(beta.vertices, gamma):
            match &= lab[:, v] == g
        val = np.full((len(lab), len(self.graphs)), q ** (len(beta.vertices) / 2))
        for e in beta.edges:
            k = self.pair_index[e]
            pe = self.edge_prob[:, k][:, None]
            val = val * (self.graphs[None, :, k] - pe) / np.sqrt(pe * (1 - pe))
        return val * match[:, None]

    def graph_marginals(self) -> tuple[np.ndarray, np.ndarray]:
        """(P(Y), E[x 1{Y}]) per graph."""
        W = self.weights
        PY = _neumaier([W[i:i + 64].sum(axis=0) for i in range(0, len(W), 64)])
        Wx = W * self.x[:, None]
        QY = _neumaier([Wx[i:i + 64].sum(axis=0) for i in range(0, len(W), 64)])
        return PY, QY


def _monomials(N: int, D: int) -> list:
    return [c for r in range(D + 1) for c in itertools.combinations(range(N), r)]


def _rational_marginals(n, q, a, b, graphs):
    pa, pb = Fraction(a) / n, Fraction(b) / n
    pairs = all_pairs(n)
    PY = [Fraction(0)] * len(graphs)
    QY = [Fraction(0)] * len(graphs)
    w0 = Fraction(1, q ** n)
    for lab in itertools.product(range(q), repeat=n):
        x = Fraction(int(lab[0] == lab[1])) - Fraction(1, q)
        probs = [pa if lab[i] == lab[j] else pb for i, j in pairs]
        for gi, Y in enumerate(graphs):
            w = w0
            for pe, y in zip(probs, Y):
                w *= pe if y else 1 - pe
            PY[gi] += w
            QY[gi] += w * x
    return PY, QY


def _rational_quadratic(G, c):
    """c^T z for any solution z of G z = c (exact elimination, rank-aware)."""
    K = len(c)
    M = [row[:] + [c[i]] for i, row in enumerate(G)]
    pivots, r = [], 0
    for col in range(K):
        piv = next((i for i in range(r, K) if M[i][col] != 0), None)
        if piv is None:
            continue
        M[r], M[piv] = M[piv], M[r]
        inv = 1 / M[r][col]
        M[r] = [v * inv for v in M[r]]
        for i in range(K):
            if i != r and M[i][col] != 0:
                f = M[i][col]
                M[i] = [vi - f * vr for vi, vr in zip(M[i], M[r])]
        pivots.append(col)
        r += 1
    z = [Fraction(0)] * K
    for i, col in enumerate(pivots):
        z[col] = M[i][K]
    return sum(ci * zi for ci, zi in zip(c, z))


def corr_exact(n: int, q: int, a: float, b: float, D: int, rational: bool = False,
               tol: float = 1e-10) -> float:
    """Best correlation of a degree-<=D polynomial in the edge indicators with x."""
    ens = ExactEnsemble(n, q, a, b)
    N = len(ens.pairs)
    mons = _monomials(N, D)
    Yg = ens.graphs
    ex2 = (1 / q) * (1 - 1 / q)
    if rational:
        if n > 4:
            raise TooLarge("rational mode limited to n <= 4")
        graphs = [tuple(int(v) for v in row) for row in Yg]
        PY, QY = _rational_marginals(n, q, a, b, graphs)
        vals = [[int(all(Y[e] for e in m)) for m in mons] for Y in graphs]
        G = [[sum(PY[g] for g in range(len(graphs)) if vals[g][i] and vals[g][j])
              for j in range(len(mons))] for i in range(len(mons))]
        c = [sum(QY[g] for g in range(len(graphs)) if vals[g][i]) for i in range(len(mons))]
        r2 = _rational_quadratic(G, c) / (Fraction(1, q) * (1 - Fraction(1, q)))
        return math.sqrt(max(float(r2), 0.0))
    PY, QY = ens.graph_marginals()
    Mon = np.ones((len(Yg), len(mons)))
    for j, m in enumerate(mons):
        for e in m:
            Mon[:, j] *= Yg[:, e]
    G = Mon.T @ (PY[:, None] * Mon)
    c = Mon.T @ QY
    w, V = np.linalg.eigh(G)
    keep = w > tol * max(w.max(), 0.0)
    proj = V[:, keep].T @ c
    r2 = float(np.sum(proj ** 2 / w[keep])) / ex2
    return math.sqrt(min(max(r2, 0.0), 1.0))


# ---------------------------------------------------------------- bounds

@dataclass
class BoundReport:
    D: int
    bound_item1: Optional[float]
    bound_item2: Optional[float]
    corr_exact: Optional[float]
    guard_item1: bool
    guard_item2: bool
    sqrt_q_over_n: float
    sqrt_Dq_over_n: float
    params: dict
    constant_C: float = 1.0
    exponent_c: float = 1.0
    caveat: str = "C and c are unspecified universal constants; evaluated at C = c = 1"

    def as_dict(self) -> dict:
        return asdict(self)


def corr_bound(D: int, p: ModelParams, C: float = 1.0, c: float = 1.0) -> BoundReport:
    """Closed-form bounds on the squared degree-D correlation."""
    n, q = p.n, p.q
    r = p.d_circ * p.lam_circ ** 2
    ells = range(1, D + 1)
    item1 = (C * q / n) * math.fsum(r ** l for l in ells)
    a_c = p.a * (1 - p.a / n)
    b_c = p.b * (1 - p.b / n)
    item2 = None
    if a_c > 0:
        ratio = 1 + (q - 1) * b_c / a_c
        item2 = (C * q / n) * math.fsum((ratio * r) ** l for l in ells)
    guard1 = D <= (p.xi * n / (C * q ** 2)) ** c
    guard2 = D <= (n / (C * q)) ** c
    return BoundReport(D, item1, item2, None, guard1, guard2,
                       math.sqrt(q / n), math.sqrt(D * q / n),
                       p.as_dict(), C, c)


def graphon_gap(n: int, q: int) -> tuple[float, float]:
    p2 = 0.5
    p1 = 0.5 - 0.25 * math.sqrt(q * q / n)
    return p1, p2


def graphon_lower_bound(n: int, q: int, D: int, reading: str = "Dq/n",
                        corr: Optional[float] = None) -> float:
    """Finite-n value of the graphon-estimation error lower bound.

    ``reading`` picks the correlation bound: ``"Dq/n"`` uses sqrt(Dq/n),
    ``"q/n"`` uses sqrt(q/n). An explicit ``corr`` overrides both.
    """
    if not 2 <= q <= math.sqrt(n):
        raise RangeError("need 2 <= q <= sqrt(n)")
    p1, p2 = graphon_gap(n, q)
    if corr is None:
        corr2 = D * q / n if reading == "Dq/n" else q / n
    else:
        corr2 = corr ** 2
    return (p2 - p1) ** 2 / q * (1 - 1 / q) * (1 - corr2)
