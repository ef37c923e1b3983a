#!/usr/bin/env python3
"""Run every built-in benchmark suite and write one CSV per suite.

Thin driver around ``forchflow reproduce``: the time-step sweep, the three
grid/permeability sweeps, the heterogeneous-pattern comparison, and the
condition-number study.  Expect roughly 15 minutes on one core; pass
--full to add the long tail (finest time step, largest grids everywhere).
"""

import argparse
import sys
import time

from forchflow.cli import REPRODUCE_TARGETS, main


def run(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out-dir", default="out", help="directory for the CSVs")
    ap.add_argument("--threads", type=int, default=1,
                    help="scenario-level worker threads")
    ap.add_argument("--full", action="store_true",
                    help="include the slowest sweep entries")
    ap.add_argument("--targets", nargs="*", default=list(REPRODUCE_TARGETS),
                    help="subset of suites to run (default: all)")
    args = ap.parse_args(argv)

    rc = 0
    for target in args.targets:
        cmd = ["reproduce", target, "--out-dir", args.out_dir,
               "--threads", str(args.threads)]
        if args.full:
            cmd.append("--full")
        t0 = time.perf_counter()
        print(f"== {target} ==", flush=True)
        rc = max(rc, main(cmd))
        print(f"   {time.perf_counter() - t0:.1f} s", flush=True)
    return rc


if __name__ == "__main__":
    sys.exit(run())
