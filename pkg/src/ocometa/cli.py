"""Command-line entry point.

    ocometa run --config exp.yaml --out results/
    ocometa sweep --config exp.yaml --out results/ [--jobs N]
    ocometa fit-slope --in results/sweep.csv --col value [--kind static]
    ocometa check [--suite NAME ...]

Exit codes: 0 success, 1 a game aborted / a check or cell failed, 2 invalid
configuration or arguments.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np
import yaml

from .arena import GameAborted
from .checks import DEFAULT_SUITES, FAULTS, SUITES, run_suites
from .experiment import (
    REGRET_KINDS,
    ConfigError,
    ExperimentConfig,
    SlopeFitError,
    aggregate,
    build_cell,
    fit_rate,
    run_cell,
    slope_by_kind,
    sweep,
    sweep_rows,
)

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _num(x):
    """JSON/CSV friendly float: NaN and infinities become None."""
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else None


def _csv_num(x) -> str:
    return "" if x is None or not math.isfinite(float(x)) else repr(float(x))


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"config: cannot read {path}: {exc.strerror}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"config: invalid YAML in {path}: {exc}") from None
    return ExperimentConfig.from_mapping(raw)


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


# -- run ---------------------------------------------------------------------


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    if len(cfg.T) != 1:
        raise ConfigError(f"T: run plays a single horizon, got {cfg.T}; use sweep for several")
    T = cfg.T[0]
    kinds = ["static"] + [k for k in cfg.regret if k != "static"]
    _, adversary, _, _, _ = build_cell(cfg, T, args.seed)
    if getattr(adversary, "comparators", None) is not None and "dynamic" not in kinds:
        kinds.append("dynamic")
    if T <= cfg.adaptive_cap and "adaptive" not in kinds:
        kinds.append("adaptive")
    cfg.regret = kinds
    res = run_cell(cfg, T, args.seed, keep_transcript=True)
    if res.error:
        print(f"game aborted: {res.error}", file=sys.stderr)
        return EXIT_FAIL

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    tr = res.transcript
    d = tr.actions.shape[1]
    with open(out / "transcript.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t"] + [f"x{i + 1}" for i in range(d)] + ["true_loss"])
        for t, (x, loss) in enumerate(zip(tr.actions, tr.true_losses), start=1):
            w.writerow([t] + [repr(float(v)) for v in x] + [repr(float(loss))])

    report = {
        "static_regret": _num(res.values.get("static")),
        "dynamic_regret": _num(res.values.get("dynamic")),
        "adaptive_regret": _num(res.values.get("adaptive")),
        "comparator": res.extras.get("comparator"),
        "comparator_converged": res.extras.get("comparator_converged"),
        "interval": [1, T],
        "adaptive_interval": res.extras.get("adaptive_interval"),
        "adaptive_exact": res.extras.get("adaptive_exact"),
        "slope_fit": None,
        "quantile_p90": None,
        "T": T,
        "seeds": {"master_seed": cfg.master_seed, "seed_index": args.seed, "cell_key": [cfg.master_seed, T, args.seed]},
        "adversary": {"type": adversary.name, "oblivious": adversary.oblivious},
        "notes": [
            "regret is per realization; for a parameterized adversary family it is not a supremum over the family",
        ],
    }
    _write_json(out / "report.json", report)
    print(f"static_regret={res.values['static']:.6g} -> {out}")
    return EXIT_OK


# -- sweep -------------------------------------------------------------------


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    if len(cfg.T) < 3:
        print(f"warning: {len(cfg.T)} horizon(s); slope fits need at least 3", file=sys.stderr)

    def progress(cell):
        if args.verbose:
            status = "failed" if cell.error else "ok"
            print(f"T={cell.T} seed={cell.seed} {status}", file=sys.stderr)

    results = sweep(cfg, jobs=args.jobs, progress=progress)
    rows = sweep_rows(cfg, results)
    aggs = aggregate(rows)
    fits = slope_by_kind(aggs)
    failed = [(r.T, r.seed, r.error) for r in results if r.error]

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "sweep.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["T", "seed", "regret_kind", "value", "runtime_ms"])
        for T, seed, kind, value, rt in rows:
            w.writerow([T, seed, kind, _csv_num(value), _csv_num(rt)])
    with open(out / "aggregate.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["T", "regret_kind", "n", "failed", "mean", "se", "p90"])
        for a in aggs:
            w.writerow([a.T, a.regret_kind, a.n, a.failed, _csv_num(a.mean), _csv_num(a.se), _csv_num(a.p90)])

    def by_T(kind, attr):
        sel = {str(a.T): _num(getattr(a, attr)) for a in aggs if a.regret_kind == kind}
        return sel or None

    primary = cfg.regret[0]
    fit_json = {k: (v.as_dict() if not isinstance(v, str) else {"error": v}) for k, v in fits.items()}
    summary = {
        "static_regret": by_T("static", "mean"),
        "dynamic_regret": by_T("dynamic", "mean"),
        "adaptive_regret": by_T("adaptive", "mean"),
        "comparator": None,
        "slope_fit": fit_json.get(primary),
        "quantile_p90": by_T(primary, "p90"),
        "regret_kind": primary,
        "slope_fits": fit_json,
        "aggregates": [
            {"T": a.T, "regret_kind": a.regret_kind, "n": a.n, "failed": a.failed, "mean": _num(a.mean), "se": _num(a.se), "p90": _num(a.p90)}
            for a in aggs
        ],
        "failed_cells": [{"T": T, "seed": s, "error": e} for T, s, e in failed],
        "config": cfg.to_mapping(),
        "notes": [
            "means are over seeds; se = sd / sqrt(n); p90 is the empirical 0.9-quantile across seeds",
            "regret is per realization; for a parameterized adversary family it is not a supremum over the family",
        ],
    }
    _write_json(out / "summary.json", summary)
    for kind, fit in fits.items():
        msg = fit if isinstance(fit, str) else f"slope={fit.slope:.4f} intercept={fit.intercept:.4f} r2={fit.r2:.4f}"
        print(f"{kind}: {msg}")
    if failed:
        print(f"{len(failed)} cell(s) failed; see summary.json", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


# -- fit-slope ---------------------------------------------------------------


def cmd_fit_slope(args) -> int:
    try:
        with open(args.inp, newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        print(f"cannot read {args.inp}: {exc.strerror}", file=sys.stderr)
        return EXIT_CONFIG
    if not rows:
        print("input CSV is empty", file=sys.stderr)
        return EXIT_CONFIG
    for col in ("T", args.col):
        if col not in rows[0]:
            print(f"column {col!r} not found (have {list(rows[0])})", file=sys.stderr)
            return EXIT_CONFIG
    if args.kind is not None:
        if "regret_kind" not in rows[0]:
            print("--kind needs a regret_kind column", file=sys.stderr)
            return EXIT_CONFIG
        rows = [r for r in rows if r["regret_kind"] == args.kind]
    elif "regret_kind" in rows[0] and len({r["regret_kind"] for r in rows}) > 1:
        print("several regret kinds in the input; pick one with --kind", file=sys.stderr)
        return EXIT_CONFIG
    groups: dict = {}
    for r in rows:
        if r[args.col] == "":
            continue
        groups.setdefault(int(r["T"]), []).append(float(r[args.col]))
    Ts = sorted(groups)
    means = [float(np.mean(groups[T])) for T in Ts]
    try:
        fit = fit_rate(Ts, means)
    except SlopeFitError as exc:
        print(f"fit refused: {exc}", file=sys.stderr)
        return EXIT_FAIL
    print(json.dumps({**fit.as_dict(), "n_points": len(Ts), "T": Ts, "mean": means}, sort_keys=True))
    return EXIT_OK


# -- check -------------------------------------------------------------------


def cmd_check(args) -> int:
    names = args.suite or DEFAULT_SUITES
    unknown = [n for n in names if n not in SUITES]
    if unknown:
        print(f"unknown suite(s) {unknown}; available: {list(SUITES)}", file=sys.stderr)
        return EXIT_CONFIG
    ok = True
    for res in run_suites(names, seed=args.seed, fault=args.inject):
        ok &= res.passed
        line = f"{'PASS' if res.passed else 'FAIL'} {res.name} ({len(res.checks)} checks)"
        if not res.passed:
            line += ": failed " + ", ".join(res.failures())
        print(line, flush=True)
    return EXIT_OK if ok else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ocometa", description="Online convex optimization meta-algorithm harness")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="play one game and write its transcript and report")
    run.add_argument("--config", required=True)
    run.add_argument("--out", required=True)
    run.add_argument("--seed", type=int, default=0, help="seed index within the master seed")
    run.set_defaults(func=cmd_run)

    sw = sub.add_parser("sweep", help="run every (T, seed) cell and fit slopes")
    sw.add_argument("--config", required=True)
    sw.add_argument("--out", required=True)
    sw.add_argument("--jobs", type=int, default=1)
    sw.add_argument("-v", "--verbose", action="store_true")
    sw.set_defaults(func=cmd_sweep)

    fit = sub.add_parser("fit-slope", help="log2-log2 least squares of a CSV column against T")
    fit.add_argument("--in", dest="inp", required=True)
    fit.add_argument("--col", required=True)
    fit.add_argument("--kind", choices=REGRET_KINDS, default=None)
    fit.set_defaults(func=cmd_fit_slope)

    chk = sub.add_parser("check", help="run the invariant suites")
    chk.add_argument("--suite", action="append", help=f"suite name, repeatable (default: all but {[n for n in SUITES if n not in DEFAULT_SUITES]})")
    chk.add_argument("--seed", type=int, default=0)
    chk.add_argument("--inject", choices=FAULTS, default=None, help="inject a known defect")
    chk.set_defaults(func=cmd_check)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "jobs", 1) < 1:
        parser.error("--jobs must be >= 1")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except GameAborted as exc:
        print(f"game aborted: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
