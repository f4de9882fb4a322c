"""Triangle-count distinguisher and the common-neighbour pair test."""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import asdict, dataclass

import numpy as np
from scipy.special import binom

from .errors import DegenerateGap
from .model import GraphSample, ModelParams


class Verdict(str, enum.Enum):
    SBM = "SBM"
    ER = "ER"


class PairVerdict(str, enum.Enum):
    SAME = "Same"
    DIFFERENT = "Different"


@dataclass(frozen=True)
class DetectionVerdict:
    statistic: float
    threshold: float
    verdict: Verdict
    expected_er: float
    expected_sbm: float

    def as_dict(self) -> dict:
        out = asdict(self)
        out["verdict"] = self.verdict.value
        return out


def count_triangles(g: GraphSample) -> int:
    """Orient each edge towards the endpoint later in (degree, id) order and
    intersect sorted out-neighbour lists."""
    if g.m == 0:
        return 0
    deg = g.degrees
    rank = np.lexsort((np.arange(g.n), deg))
    pos = np.empty(g.n, dtype=np.int64)
    pos[rank] = np.arange(g.n)
    u, v = g.edges[:, 0], g.edges[:, 1]
    lo = np.where(pos[u] < pos[v], u, v)
    hi = np.where(pos[u] < pos[v], v, u)
    order = np.lexsort((hi, lo))
    lo, hi = lo[order], hi[order]
    starts = np.searchsorted(lo, np.arange(g.n + 1))
    out = [set(hi[starts[x]:starts[x + 1]].tolist()) for x in range(g.n)]
    return sum(len(out[a] & out[b]) for a, b in zip(lo.tolist(), hi.tolist()))


def count_triangles_bruteforce(g: GraphSample) -> int:
    n = g.n
    M = np.zeros((n, n), dtype=bool)
    if g.m:
        M[g.edges[:, 0], g.edges[:, 1]] = M[g.edges[:, 1], g.edges[:, 0]] = True
    return sum(1 for i in range(n) for j in range(i + 1, n) for k in range(j + 1, n)
               if M[i, j] and M[j, k] and M[i, k])


def expected_triangles(p: ModelParams, model: str = "SBM") -> float:
    """Expected triangle count.

    ``ER``: C(n,3)(d/n)^3. ``SBM``: q equal blocks of real size n/q.
    ``SBM_iid``: exact value when labels are drawn i.i.d. uniformly, as in
    :func:`sample_sbm`.
    """
    n, q, a, b = p.n, p.q, p.a / p.n, p.b / p.n
    if model == "ER":
        return float(binom(n, 3) * (p.d / n) ** 3)
    if model == "SBM":
        m = n / q
        return float(q * binom(m, 3) * a ** 3
                     + q * (q - 1) * binom(m, 2) * m * a * b ** 2
                     + binom(q, 3) * m ** 3 * b ** 3)
    if model == "SBM_iid":
        t = binom(n, 3)
        return float(t * (a ** 3 / q ** 2 + 3 * (q - 1) / q ** 2 * a * b ** 2
                          + (q - 1) * (q - 2) / q ** 2 * b ** 3))
    raise ValueError(f"unknown model {model!r}")


def detect_triangle(g: GraphSample, p: ModelParams) -> DetectionVerdict:
    e_er = expected_triangles(p, "ER")
    e_sbm = expected_triangles(p, "SBM")
    if abs(e_sbm - e_er) < 1:
        raise DegenerateGap(f"expected counts differ by {abs(e_sbm - e_er):.3g} < 1")
    if abs(p.q * p.lam ** 3 - 1) < 0.1:
        warnings.warn("q*lambda^3 is close to 1; the triangle test is weak here", RuntimeWarning)
    thr = math.sqrt(e_er * e_sbm)
    x = count_triangles(g)
    return DetectionVerdict(float(x), thr, Verdict.SBM if x > thr else Verdict.ER, e_er, e_sbm)


def common_neighbor_threshold(p: ModelParams) -> float:
    n, q, a, b = p.n, p.q, p.a, p.b
    mu_diff = 2 * a * b / (n * q) + b ** 2 * (1 - 2 / q) / n
    return mu_diff + (a - b) ** 2 / (2 * n * q)


def common_neighbor_test(g: GraphSample, u: int, v: int, p: ModelParams) -> PairVerdict:
    if u == v:
        raise ValueError("need two distinct vertices")
    x = len(np.intersect1d(g.neighbors(u), g.neighbors(v), assume_unique=True))
    return PairVerdict.SAME if x >= common_neighbor_threshold(p) else PairVerdict.DIFFERENT
