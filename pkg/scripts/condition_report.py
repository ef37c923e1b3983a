#!/usr/bin/env python3
"""Compare linear-system conditioning across schemes as permeability grows.

Runs the condition-number suite (single step, estimates collected at every
iteration) and prints, for each (drag coefficient, grid) pair, the mean
1-norm condition estimate of every scheme at each permeability — the
stabilized scheme's flat growth is the point of the experiment.
"""

import argparse
import sys
from collections import defaultdict

from forchflow.bench import builtin_fig8, run_scenario


def run(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--betas", type=float, nargs="*", default=[1.0, 10.0, 100.0],
                    help="inertial drag coefficients to sweep")
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args(argv)

    for beta in args.betas:
        config = builtin_fig8(beta)
        rows = run_scenario(config, threads=args.threads)
        table = defaultdict(dict)   # (N, scheme) -> {k label: condest}
        ks = sorted({row.k for row in rows}, key=float)
        for row in rows:
            table[(row.N, row.scheme)][row.k] = row.condest_mean
        print(f"\n== drag coefficient {beta:g} ==")
        header = f"{'N':>5}  {'scheme':<28}" + "".join(
            f"  k={k:<10}" for k in ks)
        print(header)
        for (n, scheme) in sorted(table, key=lambda t: (t[0], t[1])):
            cells = table[(n, scheme)]
            line = f"{n:>5}  {scheme:<28}" + "".join(
                f"  {cells.get(k, float('nan')):<12.4g}" for k in ks)
            print(line)
        for n in sorted({row.N for row in rows}):
            at_max = {row.scheme: row.condest_mean for row in rows
                      if row.N == n and row.k == ks[-1]}
            best = min(at_max, key=at_max.get)
            print(f"   N={n}: smallest estimate at k={ks[-1]} -> {best}")
    return 0


if __name__ == "__main__":
    sys.exit(run())
