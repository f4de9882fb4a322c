"""Command-line entry point: ``sbm-lab {sweep,run,detect,lowdeg}``."""

from __future__ import annotations

import argparse
import json
import sys

from .errors import SBMLabError


def _cmd_sweep(args) -> int:
    from .harness import SweepSpec, emit_jsonl, emit_phase_csv, run_sweep

    spec = SweepSpec.load(args.config)
    records = run_sweep(spec, workers=args.workers)
    text = emit_phase_csv(records, args.out)
    if args.records:
        emit_jsonl(records, args.records)
    if not args.out:
        sys.stdout.write(text)
    n_err = sum(r.is_error for r in records)
    if n_err:
        print(f"{n_err} error rows", file=sys.stderr)
    return 1 if n_err else 0


def _cmd_run(args) -> int:
    from dataclasses import replace

    from .itrecovery import inefficient_trial_record
    from .model import ModelParams
    from .recovery import choose_schedule, trial_record

    p = ModelParams.from_dl(args.n, args.q, args.d, args.lam)
    if args.algo == "inefficient":
        rec = inefficient_trial_record(p, args.seed, args.budget)
    else:
        cfg = choose_schedule(p, args.threshold_factor)
        if args.k:
            cfg = replace(cfg, k=args.k)
        rec = trial_record(args.algo, p, args.seed, cfg)
    print(json.dumps(rec, sort_keys=True))
    return 0


def _cmd_detect(args) -> int:
    from .detection import detect_triangle
    from .model import GraphSample, ModelParams, sample_er, sample_sbm

    p = ModelParams.from_dl(args.n, args.q, args.d, args.lam)
    if args.graph:
        with open(args.graph) as fh:
            g = GraphSample.from_text(fh.read())
    elif args.model == "ER":
        g = sample_er(args.n, args.d, args.seed)
    else:
        g = sample_sbm(p, args.seed)
    print(json.dumps(detect_triangle(g, p).as_dict(), sort_keys=True))
    return 0


def _cmd_lowdeg(args) -> int:
    from .lowdeg import corr_bound, corr_exact
    from .model import ModelParams

    p = ModelParams(args.n, args.q, args.a, args.b)
    rep = corr_bound(args.D, p)
    if args.exact:
        rep.corr_exact = corr_exact(args.n, args.q, args.a, args.b, args.D)
    print(json.dumps(rep.as_dict(), sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sbm-lab", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("sweep", help="run a parameter sweep from a YAML config")
    s.add_argument("--config", required=True)
    s.add_argument("--out", help="phase CSV path (default: stdout)")
    s.add_argument("--records", help="per-trial JSON lines path")
    s.add_argument("--workers", type=int, default=None,
                   help="process count (default: SBM_LAB_WORKERS or CPU count)")
    s.set_defaults(func=_cmd_sweep)

    def model_args(p, with_seed=True):
        p.add_argument("--n", type=int, required=True)
        p.add_argument("--q", type=int, required=True)
        p.add_argument("--d", type=float, required=True)
        p.add_argument("--lambda", dest="lam", type=float, required=True)
        if with_seed:
            p.add_argument("--seed", type=int, default=0)

    r = sub.add_parser("run", help="one seeded recovery trial")
    r.add_argument("--algo", required=True, choices=["below_ks", "above_ks", "inefficient"])
    model_args(r)
    r.add_argument("--k", type=int, default=0, help="override the walk length")
    r.add_argument("--threshold-factor", type=float, default=0.25)
    r.add_argument("--budget", type=int, default=10 ** 6)
    r.set_defaults(func=_cmd_run)

    d = sub.add_parser("detect", help="triangle test on a sampled or stored graph")
    model_args(d)
    d.add_argument("--model", choices=["SBM", "ER"], default="SBM")
    d.add_argument("--graph", help="graph file in the text format")
    d.set_defaults(func=_cmd_detect)

    lo = sub.add_parser("lowdeg", help="low-degree correlation bounds")
    lo.add_argument("--n", type=int, required=True)
    lo.add_argument("--q", type=int, required=True)
    lo.add_argument("--a", type=float, required=True)
    lo.add_argument("--b", type=float, required=True)
    lo.add_argument("--D", type=int, required=True)
    mode = lo.add_mutually_exclusive_group()
    mode.add_argument("--exact", dest="exact", action="store_true")
    mode.add_argument("--bound-only", dest="exact", action="store_false")
    lo.set_defaults(func=_cmd_lowdeg, exact=False)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SBMLabError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
