"""Walk-statistic recovery below and above the Kesten-Stigum bound.

Both algorithms share one pipeline:

1. draw a random vertex set U and pick q representatives inside it,
2. split the rest of the graph into M parts (M = 1 above the bound),
3. for every representative, start a walk recursion at its neighbours inside
   each part and read off the walk sum at every target vertex,
4. a target gets label l when l is the only representative whose scaled sums
   beat the threshold in every part; otherwise it gets a uniform label.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, field, replace
from typing import Optional

import numpy as np

from .errors import EmptyInterval, InsufficientCandidates, InvalidParams
from .model import (GraphSample, ModelParams, RngLike, alignment, classify_regime,
                    make_rng, sample_sbm)
from .nbwalk import z_statistics

_COLUMN_CHUNK = 64
_CHUNK_FLOATS = 2 * 10 ** 7  # cap on (directed edges x columns) per walk batch


@dataclass(frozen=True)
class RepresentativeSet:
    U: np.ndarray
    U_star: np.ndarray
    degree_floor: int


@dataclass(frozen=True)
class RecoveryConfig:
    k: int
    M: int = 1
    beta: float = float("nan")
    threshold_factor: float = 0.25
    normalize: bool = True

    def __post_init__(self):
        if self.k < 1 or self.M < 1:
            raise InvalidParams("need k >= 1 and M >= 1")
        if not 0 < self.threshold_factor < 1:
            raise InvalidParams("threshold_factor must lie in (0, 1)")


def default_degree_floor(n: int) -> int:
    if n <= math.e:
        return 1
    return max(1, math.ceil(math.log(math.log(n))))


def select_representatives(g: GraphSample, q: int, rng: RngLike = None,
                           degree_floor: Optional[int] = None) -> RepresentativeSet:
    n = g.n
    if n <= q:
        raise InsufficientCandidates("need n > q")
    rng = make_rng(rng)
    size = min(n, math.ceil(math.sqrt(n * q)))
    U = np.sort(rng.choice(n, size=size, replace=False))
    floor = default_degree_floor(n) if degree_floor is None else int(degree_floor)
    outside = np.ones(n)
    outside[U] = 0
    out_deg = g.adjacency @ outside
    cands = U[out_deg[U] >= floor]
    if len(cands) < q:
        raise InsufficientCandidates(
            f"only {len(cands)} vertices of U have {floor}+ neighbours outside U; need {q}")
    return RepresentativeSet(U, rng.choice(cands, size=q, replace=False), floor)


def beta_interval(p: ModelParams, M: int) -> tuple[float, float]:
    """Open interval for beta when the graph is cut into M parts.

    Per-part model: n_i = n/M, d_i = d/M, s_i = s/M and chi_i = ln q / ln n_i.
    """
    n_i, d_i, s_i = p.n / M, p.d / M, p.s / M
    if n_i <= 1 or s_i <= 1 or d_i <= s_i ** 2:
        return (math.inf, -math.inf)
    chi = math.log(p.q) / math.log(n_i)
    return ((1 - chi) / math.log(s_i), (2 * chi - 1) / math.log(d_i / s_i ** 2))


def choose_schedule(p: ModelParams, threshold_factor: float = 0.25,
                    normalize: bool = True) -> RecoveryConfig:
    """Walk length, part count and beta for the instance's regime.

    Below the bound we use the largest M <= max(1, ceil(ln d)) whose per-part
    interval is nonempty and take its midpoint.
    """
    if p.ks_snr > 1:
        beta = 1.1 * 2 / math.log(p.s ** 2 / p.d)
        k = max(1, math.floor(beta * math.log(p.n)))
        return RecoveryConfig(k, 1, beta, threshold_factor, normalize)
    M_max = max(1, math.ceil(math.log(p.d))) if p.d > 0 else 1
    for M in range(M_max, 0, -1):
        lo, hi = beta_interval(p, M)
        if lo < hi:
            beta = 0.5 * (lo + hi)
            k = max(1, math.floor(beta * math.log(p.n / M)))
            return RecoveryConfig(k, M, beta, threshold_factor, normalize)
    raise EmptyInterval("no admissible beta: instance lies outside the efficient regime")


@dataclass
class WalkStatistics:
    """Per-part scaled walk sums and the matching thresholds.

    scores[i] has shape (n, q); thresholds[i] has shape (q,) before the
    threshold_factor is applied; active[i] marks representatives with at
    least one neighbour in part i.
    """

    reps: RepresentativeSet
    targets: np.ndarray
    scores: list
    base_thresholds: list
    active: list
    k: int
    M: int

    def candidates(self, threshold_factor: float) -> np.ndarray:
        n, q = self.scores[0].shape
        ok = np.ones((n, q), dtype=bool)
        informative = np.zeros(q, dtype=bool)
        for sc, th, act in zip(self.scores, self.base_thresholds, self.active):
            ok &= (sc > threshold_factor * th) | ~act
            informative |= act
        return ok & informative


def _partition(vertices: np.ndarray, M: int, rng) -> list:
    perm = rng.permutation(vertices)
    return [np.sort(part) for part in np.array_split(perm, M)]


def walk_statistics(g: GraphSample, p: ModelParams, cfg: RecoveryConfig, rng) -> WalkStatistics:
    n, q, k = g.n, p.q, cfg.k
    reps = select_representatives(g, q, rng)
    rest = np.setdiff1d(np.arange(n), reps.U)
    parts = _partition(rest, cfg.M, rng)
    signal = p.a / (p.a + (q - 1) * p.b) if p.a + p.b > 0 else 0.0
    scores, thresholds, active = [], [], []
    chunk = max(1, min(_COLUMN_CHUNK, _CHUNK_FLOATS // max(2 * g.m, 1)))
    for part in parts:
        in_part = np.zeros(n, dtype=bool)
        in_part[part] = True
        cols = []
        for lo in range(0, q, chunk):
            cols.append(z_statistics(g, reps.U_star[lo:lo + chunk], in_part, k, p.d))
        Z = np.concatenate(cols, axis=1)
        n_i = len(part)
        if cfg.normalize:
            s_i = p.s * n_i / n
            scale = s_i ** k / n_i if s_i != 0 else 1.0
            Z = Z / scale
        hits = np.array([in_part[g.neighbors(r)].sum() for r in reps.U_star], dtype=float)
        scores.append(Z)
        thresholds.append(q * signal * hits)
        active.append(hits > 0)
    return WalkStatistics(reps, rest, scores, thresholds, active, k, cfg.M)


@dataclass
class RecoveryOutcome:
    labels: np.ndarray
    fraction_multi_candidate: float
    fraction_zero_candidate: float
    k: int
    M: int


def _assemble(g: GraphSample, q: int, stats: WalkStatistics, cfg: RecoveryConfig, rng) -> RecoveryOutcome:
    n = g.n
    cand = stats.candidates(cfg.threshold_factor)
    labels = rng.integers(0, q, size=n)
    t = stats.targets
    counts = cand[t].sum(axis=1)
    unique = counts == 1
    labels[t[unique]] = np.argmax(cand[t[unique]], axis=1)
    labels[stats.reps.U_star] = np.arange(q)
    denom = max(len(t), 1)
    return RecoveryOutcome(labels, float((counts >= 2).sum() / denom),
                           float((counts == 0).sum() / denom), stats.k, stats.M)


def recover_walks(g: GraphSample, p: ModelParams, cfg: RecoveryConfig, rng: RngLike = None) -> RecoveryOutcome:
    rng = make_rng(rng)
    stats = walk_statistics(g, p, cfg, rng)
    return _assemble(g, p.q, stats, cfg, rng)


def recover_below_ks(g: GraphSample, p: ModelParams, cfg: RecoveryConfig, rng: RngLike = None) -> np.ndarray:
    """Algorithm with M parts; returns a total labeling."""
    return recover_walks(g, p, cfg, rng).labels


def recover_above_ks(g: GraphSample, p: ModelParams, cfg: RecoveryConfig, rng: RngLike = None) -> np.ndarray:
    """Single-part variant: walks avoid U and run over the rest of the graph."""
    return recover_walks(g, p, replace(cfg, M=1), rng).labels


def trial_record(algo: str, p: ModelParams, seed: int, cfg: Optional[RecoveryConfig] = None) -> dict:
    """Sample a graph, run one recovery algorithm and summarize the trial."""
    rng = make_rng(seed)
    t0 = time.perf_counter()
    g = sample_sbm(p, rng)
    cfg = cfg or choose_schedule(p)
    if algo == "above_ks":
        cfg = replace(cfg, M=1)
    out = recover_walks(g, p, cfg, rng)
    return {
        "seed": seed,
        "params": p.as_dict(),
        "regime": classify_regime(p).label,
        "k": out.k,
        "M": out.M,
        "alignment": alignment(out.labels, g.truth, p.q),
        "fraction_multi_candidate": out.fraction_multi_candidate,
        "fraction_zero_candidate": out.fraction_zero_candidate,
        "wall_time_ms": 1000 * (time.perf_counter() - t0),
    }
