"""Command-line front end.

Subcommands:
  run       simulate a built-in case or a scenario JSON, write run files
  verify    replay a stride-1 log through every identity check
  plotdata  emit downsampled input/output series for log-scale plotting

Exit codes: 0 success, 1 validation or usage problem (including strided logs
handed to verify), 2 runtime failure (divergence, a failed identity), 3 I/O
problem (missing files or directories). Stdout stays human-readable; machine
results go only to files.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys

import numpy as np

from . import analysis, harness
from .errors import (
    BracketFailure,
    IncompleteLog,
    NonFiniteValue,
    RootSolverFailure,
    ValidationError,
)
from .graph import laplacian
from .noise import make_noise_spec


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad flags; route through our own code instead
    def error(self, message):
        raise UsageError(message)


def build_parser() -> _Parser:
    p = _Parser(prog="hwconsensus", description=__doc__,
                formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command")

    r = sub.add_parser("run", help="simulate one scenario")
    r.add_argument("--case", type=int, choices=(1, 2, 3),
                   help="built-in four-agent benchmark case")
    r.add_argument("--scenario", help="path to a scenario JSON file")
    r.add_argument("--seed", type=int, help="override the noise seed")
    r.add_argument("--horizon", type=int, help="override the horizon")
    r.add_argument("--out", help="directory to write run files into")
    r.add_argument("--noise-off", action="store_true",
                   help="replace the noise model with exact zeros")
    r.add_argument("--log-stride", type=int,
                   help="log outputs and edge data every this many steps")

    v = sub.add_parser("verify", help="check a saved stride-1 run")
    v.add_argument("--log", required=True, help="run directory to verify")

    d = sub.add_parser("plotdata", help="downsampled series from a saved run")
    d.add_argument("--log", required=True, help="run directory to read")
    d.add_argument("--out", help="directory for the series files (default: --log)")
    d.add_argument("--points", type=int, default=500,
                   help="target number of geometrically spaced samples")
    return p


# ---------------------------------------------------------------------------

def _resolve_scenario(args) -> harness.Scenario:
    if (args.case is None) == (args.scenario is None):
        raise UsageError("exactly one of --case or --scenario is required")
    if args.case is not None:
        s = harness.builtin_case(args.case)
    else:
        s = harness.load_scenario(args.scenario)
    if args.horizon is not None:
        s = dataclasses.replace(s, horizon=args.horizon)
    if args.log_stride is not None:
        s = dataclasses.replace(s, log_stride=args.log_stride)
    if args.noise_off:
        s = dataclasses.replace(
            s, noise=make_noise_spec("zero", {}, s.noise.seed))
    if args.seed is not None:
        s = dataclasses.replace(
            s, noise=dataclasses.replace(s.noise, seed=args.seed))
    return s


def cmd_run(args) -> int:
    s = _resolve_scenario(args)
    try:
        result = harness.run(s)
    except NonFiniteValue as e:
        print(f"diverged: {e} (step {e.step}, agent {e.agent})", file=sys.stderr)
        if args.out and e.partial is not None and e.partial.log.horizon > 0:
            harness.save_run(e.partial, args.out)
            print(f"partial log written to {args.out}", file=sys.stderr)
        return 2
    summ = result.summary
    spread = summ["final_spread"]
    print(f"final spread: {spread!r}")
    print(f"final residual: {summ['final_residual']!r}")
    print(f"sigma_bar: {summ['sigma_bar_final']}")
    print(f"truncations per agent: {summ['total_truncations']}")
    print(f"wall time: {summ['wall_time']:.3f} s")
    if args.out:
        harness.save_run(result, args.out)
        print(f"wrote {args.out}")
    return 0


def cmd_verify(args) -> int:
    meta_path = os.path.join(args.log, "meta.json")
    if not os.path.exists(meta_path):
        print(f"no run found under {args.log}", file=sys.stderr)
        return 3
    with open(meta_path) as fh:
        meta = json.load(fh)
    if meta.get("log_stride", 1) != 1:
        print("verification requires stride 1", file=sys.stderr)
        return 1
    try:
        log, s = harness.load_run(args.log)
    except IncompleteLog as e:
        print(f"incomplete log: {e}", file=sys.stderr)
        return 1
    gains = s.gains()
    report, extras = analysis.full_verification(log, gains, s.topology)
    rec = extras["recursion"]

    decomp_ok = report["decomposition_max_err"] < 1e-10
    rows = [
        ("centralized replay", rec.passed,
         f"max residual {report['lemma3_residual']:.3e}"
         + ("" if rec.sigma_consistent else ", count path mismatch")),
        ("truncation window bound", report["eq26_ok"],
         f"diameter {extras['diameter']}, top count {extras['truncation_top']}"),
        ("step-count bounds", report["eq28_ok"], "grid k <= 1000"),
        ("noise decomposition", decomp_ok,
         f"max err {report['decomposition_max_err']:.3e}"),
    ]
    width = max(len(name) for name, _, _ in rows)
    for name, ok, note in rows:
        print(f"{name:<{width}}  {'pass' if ok else 'FAIL'}  {note}")
    print(f"{'relabeling structure':<{width}}  ----  "
          f"max live-step err {extras['structure_max_err']:.3e}")

    with open(os.path.join(args.log, "report.json"), "w") as fh:
        json.dump(report, fh, indent=2)
        fh.write("\n")
    metrics = analysis.consensus_metrics(log, gains, laplacian(s.topology))
    spread = metrics.spread_y.tolist()
    resid = metrics.residual.tolist()
    sbar = metrics.sigma_bar.tolist()
    vval = metrics.v.tolist()
    lines = ["k,spread_y,residual,sigma_bar,v"]
    for i in range(len(metrics.k)):
        lines.append(f"{i + 1},{spread[i]!r},{resid[i]!r},{int(sbar[i])},"
                     f"{vval[i]!r}")
    with open(os.path.join(args.log, "metrics.csv"), "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")

    return 0 if all(ok for _, ok, _ in rows) else 2


def _geometric_rows(K: int, points: int) -> np.ndarray:
    ks = np.unique(np.rint(np.geomspace(1, K, num=min(points, K))).astype(int))
    return ks - 1


def cmd_plotdata(args) -> int:
    meta_path = os.path.join(args.log, "meta.json")
    if not os.path.exists(meta_path):
        print(f"no run found under {args.log}", file=sys.stderr)
        return 3
    try:
        log, s = harness.load_run(args.log)
    except (FileNotFoundError, IncompleteLog) as e:
        print(f"unreadable run: {e}", file=sys.stderr)
        return 3
    outdir = args.out or args.log
    os.makedirs(outdir, exist_ok=True)
    n = log.u.shape[1]
    K = log.u.shape[0]

    rows = _geometric_rows(K, args.points)
    U = log.u.tolist()
    head = "k," + ",".join(f"u_{i + 1}" for i in range(n))
    lines = [head]
    for r in rows:
        lines.append(f"{r + 1}," + ",".join(repr(x) for x in U[r]))
    with open(os.path.join(outdir, "inputs.csv"), "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")

    # outputs are indexed by the step at which they take effect (k + 1)
    logged = ~np.isnan(log.y_next).any(axis=1)
    avail = np.nonzero(logged)[0]
    pick = avail[np.unique(np.searchsorted(avail, rows).clip(0, len(avail) - 1))] \
        if len(avail) else avail
    Yl = log.y_next.tolist()
    head = "k," + ",".join(f"y_{i + 1}" for i in range(n))
    lines = [head]
    for r in pick:
        lines.append(f"{r + 2}," + ",".join(repr(x) for x in Yl[r]))
    with open(os.path.join(outdir, "outputs.csv"), "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")
    print(f"wrote {os.path.join(outdir, 'inputs.csv')} and outputs.csv "
          f"({len(rows)} and {len(pick)} samples)")
    return 0


# ---------------------------------------------------------------------------

def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("a subcommand is required (run, verify, plotdata)")
        if args.command == "run":
            return cmd_run(args)
        if args.command == "verify":
            return cmd_verify(args)
        return cmd_plotdata(args)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 1
    except ValidationError as e:
        print(f"invalid configuration: {e}", file=sys.stderr)
        return 1
    except (BracketFailure, RootSolverFailure, json.JSONDecodeError) as e:
        print(f"runtime failure: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"i/o failure: {e}", file=sys.stderr)
        return 3


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    sys.exit(main())
