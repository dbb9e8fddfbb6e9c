"""Reproduce the three benchmark cases end to end.

For each case this runs the noisy benchmark, replays the saved log through
every verification identity, emits the downsampled plot series, and runs the
noise-free variant for the deterministic convergence picture. Everything goes
through the command-line front end so the files on disk are exactly what a
user of the tool would get.

Usage:
    python3 scripts/reproduce_cases.py --outdir results [--horizon 100000]
"""

import argparse
import json
import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from hwconsensus.cli import main as cli  # noqa: E402


def stage(argv) -> int:
    print(f"$ hwconsensus {' '.join(argv)}")
    code = cli(argv)
    if code != 0:
        print(f"  -> exit {code}", file=sys.stderr)
    return code


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--outdir", default="results")
    ap.add_argument("--horizon", type=int, default=100_000)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--points", type=int, default=500)
    args = ap.parse_args()

    failures = 0
    rows = []
    for case in (1, 2, 3):
        d = os.path.join(args.outdir, f"case{case}")
        failures += stage(["run", "--case", str(case), "--seed", str(args.seed),
                           "--horizon", str(args.horizon), "--out", d]) != 0
        failures += stage(["verify", "--log", d]) != 0
        failures += stage(["plotdata", "--log", d,
                           "--points", str(args.points)]) != 0

        dz = os.path.join(args.outdir, f"case{case}-noise-free")
        failures += stage(["run", "--case", str(case), "--seed", str(args.seed),
                           "--horizon", str(args.horizon), "--noise-off",
                           "--out", dz]) != 0
        failures += stage(["plotdata", "--log", dz,
                           "--points", str(args.points)]) != 0

        with open(os.path.join(d, "summary.json")) as fh:
            noisy = json.load(fh)
        with open(os.path.join(dz, "summary.json")) as fh:
            quiet = json.load(fh)
        rows.append((case, noisy["final_spread"], quiet["final_spread"],
                     noisy["sigma_bar_final"]))

    print()
    print("case  spread (noisy)  spread (noise-free)  sigma_bar")
    for case, sp, spz, sb in rows:
        print(f"{case:>4}  {sp:>14.6f}  {spz:>19.3e}  {sb:>9}")
    if failures:
        print(f"{failures} stage(s) failed", file=sys.stderr)
        return 1
    print(f"\nall stages clean; files under {args.outdir}/")
    return 0


if __name__ == "__main__":
    sys.exit(main())
