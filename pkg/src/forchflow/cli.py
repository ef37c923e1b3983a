"""Command line: run scenario files, reproduce built-in benchmark tables,
and verify discretization accuracy against the closed-form solution."""
from __future__ import annotations

import argparse
import csv
import math
import sys
from dataclasses import replace
from pathlib import Path
from typing import List, Optional

from . import bench
from .bench import (ScenarioConfig, ConfigError, parse_scenario, run_scenario,
                    emit_table, builtin_table1, builtin_table2, builtin_table3,
                    builtin_table4, builtin_table6, builtin_fig8,
                    convergence_study, PATTERNS)

REPRODUCE_TARGETS = ("table1", "table2", "table3", "table4", "table6", "fig8")


def _apply_overrides(config: ScenarioConfig, args) -> ScenarioConfig:
    updates = {}
    if args.timing_repeats is not None:
        updates["timing_repeats"] = args.timing_repeats
    scheme_updates = {}
    if args.max_iter is not None:
        scheme_updates["max_iter"] = args.max_iter
    if args.tol_a is not None:
        scheme_updates["tol_a"] = args.tol_a
    if args.tol_r is not None:
        scheme_updates["tol_r"] = args.tol_r
    if scheme_updates:
        updates["schemes"] = tuple(
            (name, replace(cfg, **scheme_updates))
            for name, cfg in config.schemes)
    return replace(config, **updates) if updates else config


def _emit(rows, out_dir: Path, name: str) -> Path:
    path = out_dir / f"{name}.csv"
    emit_table(rows, path)
    print(f"wrote {path} ({len(rows)} rows)")
    return path


def cmd_run(args) -> int:
    config = parse_scenario(args.config)
    config = _apply_overrides(config, args)
    rows = run_scenario(config, out_dir=args.out_dir, threads=args.threads)
    _emit(rows, Path(args.out_dir), config.out_prefix)
    return 0


def cmd_reproduce(args) -> int:
    out_dir = Path(args.out_dir)
    target = args.target
    if target == "table1":
        config = _apply_overrides(builtin_table1(full=args.full), args)
        rows = run_scenario(config, out_dir=args.out_dir, threads=args.threads)
        _emit(rows, out_dir, "table1")
    elif target in ("table2", "table3", "table4"):
        builder = {"table2": builtin_table2, "table3": builtin_table3,
                   "table4": builtin_table4}[target]
        config = _apply_overrides(builder(), args)
        rows = run_scenario(config, out_dir=args.out_dir, threads=args.threads)
        _emit(rows, out_dir, target)
    elif target == "table6":
        rows = []
        for pattern in PATTERNS:
            for beta in (1.0, 1e4):
                config = _apply_overrides(builtin_table6(pattern, beta), args)
                rows.extend(run_scenario(config, out_dir=args.out_dir,
                                         threads=args.threads))
        _emit(rows, out_dir, "table6")
    elif target == "fig8":
        rows = []
        for beta in (1.0, 10.0, 100.0):
            config = _apply_overrides(builtin_fig8(beta), args)
            rows.extend(run_scenario(config, out_dir=args.out_dir,
                                     threads=args.threads))
        _emit(rows, out_dir, "fig8")
    else:
        raise ConfigError(f"unknown reproduce target {target!r}")
    return 0


def cmd_verify(args) -> int:
    triples = convergence_study()
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "verify.csv"
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["h", "err_p", "err_u"])
        for h, ep, eu in triples:
            writer.writerow([f"{h:.17g}", f"{ep:.17g}", f"{eu:.17g}"])
    print(f"{'h':>10} {'err_p':>12} {'err_u':>12} {'order_p':>8} {'order_u':>8}")
    ok = True
    for i, (h, ep, eu) in enumerate(triples):
        if i == 0:
            print(f"{h:10.5f} {ep:12.4e} {eu:12.4e} {'':>8} {'':>8}")
            continue
        hp, epp, eup = triples[i - 1]
        op = math.log(epp / ep) / math.log(hp / h)
        ou = math.log(eup / eu) / math.log(hp / h)
        ok = ok and ep < epp and eu < eup
        print(f"{h:10.5f} {ep:12.4e} {eu:12.4e} {op:8.2f} {ou:8.2f}")
    print(f"wrote {path}")
    if not ok:
        print("errors did not decrease monotonically", file=sys.stderr)
        return 1
    return 0


def make_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out-dir", default="out",
                        help="output directory for CSV/VTK files")
    common.add_argument("--threads", type=int, default=1,
                        help="scenario-level worker threads")
    common.add_argument("--max-iter", type=int, default=None,
                        help="override every scheme's iteration cap")
    common.add_argument("--tol-a", type=float, default=None,
                        help="override absolute stopping tolerance")
    common.add_argument("--tol-r", type=float, default=None,
                        help="override relative stopping tolerance")
    common.add_argument("--timing-repeats", type=int, default=None,
                        help="repeat runs and report median wall time")

    parser = argparse.ArgumentParser(
        prog="forchflow",
        description="Finite-volume benchmarks for slightly compressible "
                    "Darcy-Forchheimer flow")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", parents=[common],
                           help="run a scenario config file")
    p_run.add_argument("config", help="path to an INI scenario document")
    p_run.set_defaults(func=cmd_run)

    p_rep = sub.add_parser("reproduce", parents=[common],
                           help="run a built-in benchmark")
    p_rep.add_argument("target", choices=REPRODUCE_TARGETS)
    p_rep.add_argument("--full", action="store_true",
                       help="include the tau=0.001 ladder step (table1)")
    p_rep.set_defaults(func=cmd_reproduce)

    p_ver = sub.add_parser("verify", parents=[common],
                           help="manufactured-solution convergence study")
    p_ver.set_defaults(func=cmd_verify)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
