#!/usr/bin/env python3
"""Measure spatial convergence on the closed-form benchmark solution.

Refines the grid, solves one transient with the time step tied to the mesh,
and prints discrete L2 errors for pressure and velocity together with the
observed orders between consecutive refinements.
"""

import argparse
import math
import sys

from forchflow.bench import convergence_study


def run(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--grids", type=int, nargs="*", default=[20, 40, 80, 160],
                    help="cells per side at each refinement level")
    ap.add_argument("--k", type=float, default=1.0)
    ap.add_argument("--beta", type=float, default=1.0)
    args = ap.parse_args(argv)

    results = convergence_study(hs=tuple(args.grids), k=args.k, beta=args.beta)
    print(f"{'N':>6} {'err_p':>14} {'order':>7} {'err_u':>14} {'order':>7}")
    prev = None
    ok = True
    for h, err_p, err_u in results:
        op = ou = ""
        if prev is not None:
            refinement = prev[0] / h
            op = f"{math.log(prev[1] / err_p) / math.log(refinement):.2f}"
            ou = f"{math.log(prev[2] / err_u) / math.log(refinement):.2f}"
            ok = ok and err_p < prev[1] and err_u < prev[2]
        print(f"{round(1 / h):>6} {err_p:>14.6e} {op:>7} {err_u:>14.6e} {ou:>7}")
        prev = (h, err_p, err_u)
    print("errors strictly decreasing:", ok)
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(run())
