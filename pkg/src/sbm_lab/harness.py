"""Seeded parameter sweeps and phase-diagram CSV output.

A sweep config is YAML::

    base_seed: 1
    trials: 3
    algorithms: [above_ks, detect, lowdeg_bound]
    grid:
      n: [2000]
      chi: [0.5]        # or q: [...]
      d: [5]
      lambda: [0.8]     # or kappa: [...], giving lambda = d ** -kappa
    options:
      budget: 100000    # search budget for `inefficient`
      lowdeg_D: 4

Each (point, trial) pair gets its own seed derived from
(base_seed, point index, trial index), so results do not depend on the
number of workers or on execution order.
"""

from __future__ import annotations

import concurrent.futures as cf
import csv
import io
import itertools
import json
import math
import os
import time
import traceback
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
import yaml

from .detection import Verdict, detect_triangle
from .errors import ConfigError, EmptyInterval, SchemaMismatch
from .itrecovery import inefficient_trial_record
from .lowdeg import corr_bound
from .model import ModelParams, classify_regime, make_rng, sample_er, sample_sbm
from .recovery import choose_schedule, trial_record

ALGORITHMS = ("below_ks", "above_ks", "inefficient", "detect", "lowdeg_bound")

PHASE_COLUMNS = [
    "point", "n", "q", "d", "lambda", "chi", "kappa", "regime", "it_impossible",
    "ks_snr", "modified_snr", "trials", "error_trials",
    "alignment_below_ks", "alignment_above_ks", "alignment_inefficient",
    "detection_power", "lowdeg_bound",
]


@dataclass(frozen=True)
class GridPoint:
    n: int
    q: int
    d: float
    lam: float
    chi: Optional[float] = None
    kappa: Optional[float] = None

    def params(self) -> ModelParams:
        return ModelParams.from_dl(self.n, self.q, self.d, self.lam)


@dataclass(frozen=True)
class SweepSpec:
    points: tuple
    trials: int
    algorithms: tuple
    base_seed: int
    options: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, cfg: dict) -> "SweepSpec":
        if not isinstance(cfg, dict):
            raise ConfigError("config must be a mapping")
        try:
            grid = cfg["grid"]
            trials = int(cfg.get("trials", 1))
            base_seed = int(cfg.get("base_seed", 0))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"malformed config: {exc}") from None
        algos = tuple(cfg.get("algorithms") or ())
        bad = [a for a in algos if a not in ALGORITHMS]
        if bad:
            raise ConfigError(f"unknown algorithms {bad}; choose from {ALGORITHMS}")
        if trials < 1:
            raise ConfigError("trials must be at least 1")
        if not isinstance(grid, dict):
            raise ConfigError("grid must be a mapping")
        if ("q" in grid) == ("chi" in grid):
            raise ConfigError("grid needs exactly one of q, chi")
        if ("lambda" in grid) == ("kappa" in grid):
            raise ConfigError("grid needs exactly one of lambda, kappa")
        axes = {}
        for key in ("n", "q", "chi", "d", "lambda", "kappa"):
            if key in grid:
                vals = grid[key] if isinstance(grid[key], list) else [grid[key]]
                if not vals:
                    raise ConfigError(f"grid axis {key} is empty")
                axes[key] = vals
        if "n" not in axes or "d" not in axes:
            raise ConfigError("grid needs n and d")
        points = []
        qk = "q" if "q" in axes else "chi"
        lk = "lambda" if "lambda" in axes else "kappa"
        for n, qv, d, lv in itertools.product(axes["n"], axes[qk], axes["d"], axes[lk]):
            n, d = int(n), float(d)
            q = int(qv) if qk == "q" else int(round(n ** float(qv)))
            lam = float(lv) if lk == "lambda" else d ** (-float(lv))
            points.append(GridPoint(n, q, d, lam,
                                    float(qv) if qk == "chi" else None,
                                    float(lv) if lk == "kappa" else None))
        options = dict(cfg.get("options") or {})
        return cls(tuple(points), trials, algos, base_seed, options)

    @classmethod
    def from_yaml(cls, text: str) -> "SweepSpec":
        try:
            return cls.from_dict(yaml.safe_load(text))
        except yaml.YAMLError as exc:
            raise ConfigError(f"unreadable config: {exc}") from None

    @classmethod
    def load(cls, path: str) -> "SweepSpec":
        with open(path) as fh:
            return cls.from_yaml(fh.read())


@dataclass
class TrialRecord:
    point: int
    trial: int
    n: int
    q: int
    d: float
    lam: float
    chi: Optional[float]
    kappa: Optional[float]
    seed: int
    regime: str
    it_impossible: bool
    ks_snr: float
    modified_snr: float
    results: dict
    errors: dict
    wall_time_ms: float

    @property
    def is_error(self) -> bool:
        return bool(self.errors)

    def schema(self) -> tuple:
        return tuple(sorted(set(self.results) | set(self.errors)))

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def trial_seed(base_seed: int, point: int, trial: int) -> int:
    ss = np.random.SeedSequence([base_seed, point, trial])
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


def _run_algorithm(algo: str, p: ModelParams, seed: int, options: dict):
    if algo in ("below_ks", "above_ks"):
        try:
            cfg = choose_schedule(p)
        except EmptyInterval as exc:
            # outside the algorithm's regime: not applicable rather than a failure
            return {"alignment": None, "skipped": str(exc)}
        rec = trial_record(algo, p, seed, cfg)
        return {"alignment": rec["alignment"], "k": rec["k"], "M": rec["M"]}
    if algo == "inefficient":
        rec = inefficient_trial_record(p, seed, int(options.get("budget", 10 ** 6)))
        return {"alignment": rec["alignment"], "search_objective": rec["search_objective"]}
    if algo == "detect":
        rng = make_rng(seed)
        v_sbm = detect_triangle(sample_sbm(p, rng), p)
        v_er = detect_triangle(sample_er(p.n, p.d, rng), p)
        return {"sbm_correct": v_sbm.verdict == Verdict.SBM,
                "er_correct": v_er.verdict == Verdict.ER}
    if algo == "lowdeg_bound":
        rep = corr_bound(int(options.get("lowdeg_D", 4)), p)
        return {"bound_item1": rep.bound_item1}
    raise ConfigError(f"unknown algorithm {algo}")


def run_trial(spec: SweepSpec, point: int, trial: int) -> TrialRecord:
    gp = spec.points[point]
    seed = trial_seed(spec.base_seed, point, trial)
    t0 = time.perf_counter()
    results, errors = {}, {}
    try:
        p = gp.params()
        reg = classify_regime(p)
        regime, itimp, ks, mod = reg.label, reg.it_impossible, reg.ks_snr, reg.modified_snr
    except Exception as exc:  # invalid point: every algorithm fails
        regime, itimp, ks, mod = "", False, float("nan"), float("nan")
        errors = {a: f"{type(exc).__name__}: {exc}" for a in (spec.algorithms or ("params",))}
        p = None
    if p is not None:
        for algo in spec.algorithms:
            try:
                results[algo] = _run_algorithm(algo, p, seed, spec.options)
            except Exception as exc:
                errors[algo] = f"{type(exc).__name__}: {exc}"
    return TrialRecord(point, trial, gp.n, gp.q, gp.d, gp.lam, gp.chi, gp.kappa, seed,
                       regime, itimp, ks, mod, results, errors,
                       1000 * (time.perf_counter() - t0))


def _run_task(args):
    spec, point, trial = args
    return run_trial(spec, point, trial)


def worker_count() -> int:
    env = os.environ.get("SBM_LAB_WORKERS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError("SBM_LAB_WORKERS must be an integer") from None
    return os.cpu_count() or 1


def run_sweep(spec: SweepSpec, workers: Optional[int] = None) -> list:
    tasks = [(spec, i, t) for i in range(len(spec.points)) for t in range(spec.trials)]
    workers = worker_count() if workers is None else max(1, workers)
    workers = min(workers, len(tasks)) if tasks else 1
    if workers == 1:
        return [_run_task(t) for t in tasks]
    with cf.ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_task, tasks))


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return "" if math.isnan(x) else repr(float(x))
    return str(x)


def _mean(xs):
    xs = [float(x) for x in xs]
    return math.fsum(xs) / len(xs) if xs else None


def phase_rows(records) -> list:
    records = list(records)
    schemas = {r.schema() for r in records if not r.is_error}
    if len(schemas) > 1:
        raise SchemaMismatch(f"records mix algorithm sets: {sorted(schemas)}")
    by_point: dict = {}
    for r in records:
        by_point.setdefault(r.point, []).append(r)
    rows = []
    for point in sorted(by_point):
        rs = sorted(by_point[point], key=lambda r: r.trial)
        r0 = rs[0]

        def collect(algo, key):
            vals = (r.results[algo].get(key) for r in rs if algo in r.results)
            return [v for v in vals if v is not None]

        det = [x for r in rs if "detect" in r.results
               for x in (r.results["detect"]["sbm_correct"], r.results["detect"]["er_correct"])]
        bounds = collect("lowdeg_bound", "bound_item1")
        rows.append({
            "point": point, "n": r0.n, "q": r0.q, "d": r0.d, "lambda": r0.lam,
            "chi": r0.chi, "kappa": r0.kappa, "regime": r0.regime,
            "it_impossible": r0.it_impossible, "ks_snr": r0.ks_snr,
            "modified_snr": r0.modified_snr, "trials": len(rs),
            "error_trials": sum(r.is_error for r in rs),
            "alignment_below_ks": _mean(collect("below_ks", "alignment")),
            "alignment_above_ks": _mean(collect("above_ks", "alignment")),
            "alignment_inefficient": _mean(collect("inefficient", "alignment")),
            "detection_power": _mean(det),
            "lowdeg_bound": bounds[0] if bounds else None,
        })
    return rows


def emit_phase_csv(records, path=None) -> str:
    """One row per grid point, columns in PHASE_COLUMNS order. Returns the text."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(PHASE_COLUMNS)
    for row in phase_rows(records):
        w.writerow([_fmt(row[c]) for c in PHASE_COLUMNS])
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text


def emit_jsonl(records, path=None) -> str:
    text = "".join(r.to_json() + "\n" for r in records)
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text
