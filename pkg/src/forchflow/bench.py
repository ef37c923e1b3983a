"""Benchmark scenarios: configuration, drivers, and output emission.

A scenario document is an INI file with one [scenario] section of flat
keys and any number of [scheme:NAME] sections. Comma-separated lists for
n, k, beta, and tau expand to their cartesian product of runs. Unknown
keys are rejected. The full schema is documented in the README.
"""
from __future__ import annotations

import configparser
import csv
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .grid import Grid, build_grid
from . import physics
from .physics import (ProblemSpec, Constant, PiecewiseCells, VARIABLE,
                      CONSTANT_ONE, permeability_pattern,
                      manufactured_problem, crossflow_problem,
                      manufactured_pressure, manufactured_velocity)
from .linearization import (SchemeConfig, SolveReport, run_transient,
                            LSCHEME, PICARD, RELAXED_PICARD, NEWTON, KINDS)
from .tpfa import State

CSV_HEADER = ["scheme", "gamma", "L", "omega", "N", "k", "beta", "tau",
              "avg_iters", "converged", "wall_s", "condest_mean"]

PROBLEMS = ("manufactured", "crossflow")
PATTERNS = ("strip", "squares", "lshapes")
LOG_SPEED_FLOOR = 1e-300

_SCENARIO_KEYS = {
    "nx", "ny", "domain", "problem", "k", "pattern", "k_in", "k_out",
    "beta", "tau", "t_end", "mu", "cf", "density", "emit_fields",
    "out_prefix", "timing_repeats",
}
_SCHEME_KEYS = {"kind", "gamma", "l", "omega", "tol_a", "tol_r", "max_iter",
                "estimate_condition", "relax_start"}


class ConfigError(ValueError):
    """Scenario document rejected; message names the offending key."""


@dataclass(frozen=True)
class ScenarioConfig:
    """Parsed scenario: grid sizes, problem family, parameter lists, and
    the schemes to run on every combination."""
    n_list: Tuple[int, ...]
    problem: str
    k_list: Tuple[float, ...]
    pattern: Optional[str]
    k_in: float
    k_out: float
    beta_list: Tuple[float, ...]
    tau_list: Tuple[float, ...]
    t_end: Optional[float]
    mu: float
    cf: float
    density_mode: str
    schemes: Tuple[Tuple[str, SchemeConfig], ...]
    domain: Tuple[float, float, float, float] = (0.0, 1.0, 0.0, 1.0)
    ny_list: Optional[Tuple[int, ...]] = None
    emit_fields: bool = False
    out_prefix: str = "scenario"
    timing_repeats: int = 1


@dataclass
class TableRow:
    """One benchmark result: scheme identity and parameters, case size and
    coefficients, and the aggregate iteration/timing diagnostics."""
    scheme: str
    gamma: Optional[float]
    L: Optional[float]
    omega: Optional[float]
    N: int
    k: str
    beta: float
    tau: float
    avg_iters: Optional[float]
    converged: bool
    wall_s: float
    condest_mean: Optional[float]
    err_p: Optional[float] = None
    err_u: Optional[float] = None
    worst_mass: Optional[float] = None

    def __post_init__(self):
        if self.avg_iters is not None and self.avg_iters < 0:
            raise ValueError("negative iteration average")


def _parse_floats(text: str, key: str) -> Tuple[float, ...]:
    try:
        return tuple(float(tok) for tok in text.split(","))
    except ValueError as err:
        raise ConfigError(f"key {key!r}: cannot parse {text!r} as numbers") from err


def _parse_bool(text: str, key: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"key {key!r}: cannot parse {text!r} as a flag")


def parse_scenario(path) -> ScenarioConfig:
    """Read and validate a scenario document; unknown keys are errors."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    read = parser.read(str(path))
    if not read:
        raise ConfigError(f"cannot read config file {path}")
    if "scenario" not in parser:
        raise ConfigError("missing [scenario] section")
    sc = parser["scenario"]
    for key in sc:
        if key not in _SCENARIO_KEYS:
            raise ConfigError(f"unknown key {key!r} in [scenario]")

    def get(key, default=None):
        return sc.get(key, default)

    try:
        n_list = tuple(int(v) for v in _parse_floats(get("nx", "40"), "nx"))
    except ConfigError:
        raise
    ny_raw = get("ny")
    ny_list = tuple(int(v) for v in _parse_floats(ny_raw, "ny")) if ny_raw else None
    if ny_list is not None and len(ny_list) != len(n_list):
        raise ConfigError("key 'ny': length must match 'nx'")
    domain = tuple(_parse_floats(get("domain", "0,1,0,1"), "domain"))
    if len(domain) != 4:
        raise ConfigError("key 'domain': need x0,x1,y0,y1")

    problem = get("problem", "manufactured").strip().lower()
    if problem not in PROBLEMS:
        raise ConfigError(f"key 'problem': unknown problem {problem!r}")

    pattern = get("pattern")
    pattern = pattern.strip().lower() if pattern else None
    if pattern is not None and pattern not in PATTERNS:
        raise ConfigError(f"key 'pattern': unknown pattern {pattern!r}")
    if pattern is not None and get("k") is not None:
        raise ConfigError("keys 'pattern' and 'k' are mutually exclusive")
    if pattern is not None and problem == "manufactured":
        raise ConfigError("manufactured problem requires constant k, not a pattern")
    k_list = _parse_floats(get("k", "1.0"), "k")
    k_in = float(get("k_in", "1e-4"))
    k_out = float(get("k_out", "1.0"))

    beta_list = _parse_floats(get("beta", "1.0"), "beta")
    tau_list = _parse_floats(get("tau", "1.0"), "tau")
    t_raw = get("t_end")
    t_end = float(t_raw) if t_raw else None
    mu = float(get("mu", "1.0"))
    cf = float(get("cf", "1e-5"))
    density_mode = get("density", VARIABLE).strip().lower()
    if density_mode not in (VARIABLE, CONSTANT_ONE):
        raise ConfigError(f"key 'density': unknown mode {density_mode!r}")
    emit_fields = _parse_bool(get("emit_fields", "false"), "emit_fields")
    out_prefix = get("out_prefix", "scenario").strip()
    timing_repeats = int(get("timing_repeats", "1"))
    if timing_repeats < 1:
        raise ConfigError("key 'timing_repeats': must be >= 1")

    schemes: List[Tuple[str, SchemeConfig]] = []
    for section in parser.sections():
        if section == "scenario":
            continue
        if not section.startswith("scheme:"):
            raise ConfigError(f"unknown section [{section}]")
        name = section[len("scheme:"):]
        body = parser[section]
        for key in body:
            if key not in _SCHEME_KEYS:
                raise ConfigError(f"unknown key {key!r} in [{section}]")
        kind = body.get("kind", "").strip().upper()
        if kind not in KINDS:
            raise ConfigError(f"[{section}]: unknown scheme kind {kind!r}")
        kwargs = {}
        if "gamma" in body:
            kwargs["gamma"] = float(body["gamma"])
        if "l" in body:
            kwargs["L"] = float(body["l"])
        if "omega" in body:
            kwargs["omega"] = float(body["omega"])
        if "tol_a" in body:
            kwargs["tol_a"] = float(body["tol_a"])
        if "tol_r" in body:
            kwargs["tol_r"] = float(body["tol_r"])
        if "max_iter" in body:
            kwargs["max_iter"] = int(body["max_iter"])
        if "estimate_condition" in body:
            kwargs["estimate_condition"] = _parse_bool(
                body["estimate_condition"], "estimate_condition")
        if "relax_start" in body:
            kwargs["relax_start"] = int(body["relax_start"])
        try:
            schemes.append((name, SchemeConfig(kind=kind, **kwargs)))
        except ValueError as err:
            raise ConfigError(f"[{section}]: {err}") from err

    return ScenarioConfig(
        n_list=n_list, ny_list=ny_list, domain=domain, problem=problem,
        k_list=k_list, pattern=pattern, k_in=k_in, k_out=k_out,
        beta_list=beta_list, tau_list=tau_list, t_end=t_end, mu=mu, cf=cf,
        density_mode=density_mode, schemes=tuple(schemes),
        emit_fields=emit_fields, out_prefix=out_prefix,
        timing_repeats=timing_repeats)


def build_problem(config: ScenarioConfig, n: int, k: float, beta: float,
                  tau: float, ny: Optional[int] = None):
    """Materialize (Grid, ProblemSpec) for one parameter combination."""
    grid = build_grid(n, ny if ny is not None else n, config.domain)
    t_end = config.t_end if config.t_end is not None else tau
    if config.problem == "manufactured":
        spec = manufactured_problem(k=k, beta=beta, tau=tau, T=t_end,
                                    mu=config.mu, cf=config.cf,
                                    density_mode=config.density_mode)
    else:
        if config.pattern is not None:
            perm = permeability_pattern(config.pattern, grid,
                                        config.k_in, config.k_out)
        else:
            perm = Constant(k)
        spec = crossflow_problem(perm, beta=beta, tau=tau, T=t_end,
                                 mu=config.mu, cf=config.cf,
                                 density_mode=config.density_mode)
    return grid, spec


def _k_label(config: ScenarioConfig, k: float) -> str:
    if config.problem == "crossflow" and config.pattern is not None:
        return f"{config.pattern}:{config.k_in:g}/{config.k_out:g}"
    return f"{k:.17g}"


def _run_one(config: ScenarioConfig, name: str, cfg: SchemeConfig, n: int,
             ny: Optional[int], k: float, beta: float, tau: float,
             out_dir: Optional[Path]) -> TableRow:
    grid, spec = build_problem(config, n, k, beta, tau, ny)
    walls = []
    state: State
    report: SolveReport
    for _ in range(max(1, config.timing_repeats)):
        state, report = run_transient(grid, spec, cfg)
        walls.append(report.total_wall_s)
    wall = float(np.median(walls))
    converged = report.all_converged
    err_p = err_u = None
    if config.problem == "manufactured" and converged:
        err_p, err_u = measure_errors(grid, spec, state, spec.T)
    cm = report.condest_mean
    row = TableRow(
        scheme=cfg.kind,
        gamma=cfg.gamma if cfg.kind == LSCHEME else None,
        L=cfg.L if cfg.kind == LSCHEME else None,
        omega=cfg.omega if cfg.kind == RELAXED_PICARD else None,
        N=n, k=_k_label(config, k), beta=beta, tau=tau,
        avg_iters=report.avg_iterations if converged else None,
        converged=converged, wall_s=wall,
        condest_mean=None if math.isnan(cm) else cm,
        err_p=err_p, err_u=err_u,
        worst_mass=report.worst_mass_residual)
    if config.emit_fields and out_dir is not None:
        fname = (f"{config.out_prefix}_{name}_N{n}_k{_k_label(config, k)}"
                 f"_b{beta:g}_tau{tau:g}.vtk").replace("/", "-")
        emit_field(grid, state, out_dir / fname)
    return row


def run_scenario(config: ScenarioConfig, out_dir=None,
                 threads: int = 1) -> List[TableRow]:
    """Run every (scheme, n, k, beta, tau) combination of the scenario.
    Rows keep a fixed deterministic order regardless of thread count."""
    out_path = Path(out_dir) if out_dir is not None else None
    if out_path is not None:
        out_path.mkdir(parents=True, exist_ok=True)
    jobs = []
    for name, cfg in config.schemes:
        for idx, n in enumerate(config.n_list):
            ny = config.ny_list[idx] if config.ny_list else None
            for k in config.k_list:
                for beta in config.beta_list:
                    for tau in config.tau_list:
                        jobs.append((name, cfg, n, ny, k, beta, tau))
    if threads <= 1 or len(jobs) <= 1:
        return [_run_one(config, *job, out_dir=out_path) for job in jobs]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = [pool.submit(_run_one, config, *job, out_dir=out_path)
                   for job in jobs]
        return [f.result() for f in futures]


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def emit_table(rows: Sequence[TableRow], path) -> None:
    """Write rows as CSV with the fixed column set; non-converged rows get
    an empty iterations cell (the tables' dash)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for row in rows:
            writer.writerow([
                row.scheme, _fmt(row.gamma), _fmt(row.L), _fmt(row.omega),
                row.N, row.k, _fmt(row.beta), _fmt(row.tau),
                _fmt(row.avg_iters if row.converged else None),
                _fmt(row.converged), _fmt(row.wall_s),
                _fmt(row.condest_mean)])


def read_table(path) -> List[dict]:
    """Read an emitted CSV back into dicts with numeric fields restored."""
    out = []
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            parsed = dict(rec)
            for key in ("gamma", "L", "omega", "beta", "tau", "avg_iters",
                        "wall_s", "condest_mean"):
                parsed[key] = float(rec[key]) if rec[key] != "" else None
            parsed["N"] = int(rec["N"])
            parsed["converged"] = rec["converged"] == "true"
            out.append(parsed)
    return out


def cell_speed(grid: Grid, state: State) -> np.ndarray:
    """Velocity magnitude at cell centers from face-average components."""
    ucx = 0.5 * (state.ux[:, :-1] + state.ux[:, 1:])
    ucy = 0.5 * (state.uy[:-1, :] + state.uy[1:, :])
    return np.hypot(ucx, ucy)


def emit_field(grid: Grid, state: State, path) -> None:
    """Write cell-centered pressure and log10 speed as VTK-legacy ASCII
    structured points (one lattice point per cell center)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    speed = cell_speed(grid, state)
    log_speed = np.log10(np.maximum(speed, LOG_SPEED_FLOOR))
    x0, _, y0, _ = grid.domain
    lines = [
        "# vtk DataFile Version 3.0",
        "pressure and log10 speed at cell centers",
        "ASCII",
        "DATASET STRUCTURED_POINTS",
        f"DIMENSIONS {grid.nx} {grid.ny} 1",
        f"ORIGIN {x0 + grid.hx / 2:.17g} {y0 + grid.hy / 2:.17g} 0",
        f"SPACING {grid.hx:.17g} {grid.hy:.17g} 1",
        f"POINT_DATA {grid.n_cells}",
        "SCALARS pressure double 1",
        "LOOKUP_TABLE default",
    ]
    lines += [f"{v:.17g}" for v in state.p.ravel()]
    lines += ["SCALARS log10_speed double 1", "LOOKUP_TABLE default"]
    lines += [f"{v:.17g}" for v in log_speed.ravel()]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def measure_errors(grid: Grid, spec: ProblemSpec, state: State,
                   t: float) -> Tuple[float, float]:
    """Discrete L2 errors against the closed-form solution: cell-wise for
    pressure, face-wise for normal velocities."""
    Xc, Yc = grid.cell_centers()
    p_exact = manufactured_pressure(Xc, Yc, t)
    ep = float(np.sqrt(np.sum((state.p - p_exact) ** 2) * grid.cell_volume))
    Xf, Yf = grid.xface_coords()
    uxe, _ = manufactured_velocity(spec, Xf, Yf, t)
    Xg, Yg = grid.yface_coords()
    _, uye = manufactured_velocity(spec, Xg, Yg, t)
    eu2 = (np.sum((state.ux - uxe) ** 2) + np.sum((state.uy - uye) ** 2))
    eu = float(np.sqrt(eu2 * grid.cell_volume))
    return ep, eu


# ---------------------------------------------------------------------------
# Built-in reproduction setups (parameters hard-coded from the benchmark
# definitions; each maps to one emitted CSV).

def _scheme_quartet(omega: float, L: float) -> Tuple[Tuple[str, SchemeConfig], ...]:
    return (("newton", SchemeConfig(kind=NEWTON)),
            ("picard", SchemeConfig(kind=PICARD)),
            ("relaxed", SchemeConfig(kind=RELAXED_PICARD, omega=omega)),
            ("lscheme", SchemeConfig(kind=LSCHEME, gamma=0.0, L=L)))


def builtin_table1(full: bool = False, **overrides) -> ScenarioConfig:
    """Transient manufactured case at h=1/80, k=beta=1: five schemes over
    the time-step ladder (tau=1e-3 only with full=True)."""
    taus = (1.0, 0.5, 0.1, 0.01, 0.001) if full else (1.0, 0.5, 0.1, 0.01)
    schemes = (("newton", SchemeConfig(kind=NEWTON)),
               ("picard", SchemeConfig(kind=PICARD)),
               ("relaxed", SchemeConfig(kind=RELAXED_PICARD, omega=0.7)),
               ("lscheme0", SchemeConfig(kind=LSCHEME, gamma=0.0, L=0.07)),
               ("lscheme1", SchemeConfig(kind=LSCHEME, gamma=1.0, L=0.4)))
    base = dict(n_list=(80,), problem="manufactured", k_list=(1.0,),
                pattern=None, k_in=1e-4, k_out=1.0, beta_list=(1.0,),
                tau_list=taus, t_end=1.0, mu=1.0, cf=1e-5,
                density_mode=VARIABLE, schemes=schemes, out_prefix="table1")
    base.update(overrides)
    return ScenarioConfig(**base)


def _builtin_single_step(beta: float, L: float, prefix: str,
                         **overrides) -> ScenarioConfig:
    base = dict(n_list=(40, 80, 160, 320), problem="manufactured",
                k_list=(1e-2, 1.0, 1e2), pattern=None, k_in=1e-4, k_out=1.0,
                beta_list=(beta,), tau_list=(1.0,), t_end=1.0, mu=1.0,
                cf=1e-5, density_mode=VARIABLE,
                schemes=_scheme_quartet(omega=0.7, L=L), out_prefix=prefix)
    base.update(overrides)
    return ScenarioConfig(**base)


def builtin_table2(**overrides) -> ScenarioConfig:
    """Single step tau=1, beta=1, grid/permeability sweep."""
    return _builtin_single_step(1.0, 0.07, "table2", **overrides)


def builtin_table3(**overrides) -> ScenarioConfig:
    """Single step tau=1, beta=10."""
    return _builtin_single_step(10.0, 0.22, "table3", **overrides)


def builtin_table4(**overrides) -> ScenarioConfig:
    """Single step tau=1, beta=100."""
    return _builtin_single_step(100.0, 0.7, "table4", **overrides)


def builtin_table6(pattern: str, beta: float, **overrides) -> ScenarioConfig:
    """Heterogeneous crossflow at h=1/160, tau=0.1 to T=1; one pattern and
    inertial coefficient per scenario."""
    if pattern not in PATTERNS:
        raise ConfigError(f"unknown pattern {pattern!r}")
    L = 0.7 if beta == 1.0 else 70.0
    base = dict(n_list=(160,), problem="crossflow", k_list=(1.0,),
                pattern=pattern, k_in=1e-4, k_out=1.0, beta_list=(beta,),
                tau_list=(0.1,), t_end=1.0, mu=1.0, cf=1e-5,
                density_mode=VARIABLE, schemes=_scheme_quartet(omega=0.8, L=L),
                out_prefix=f"table6_{pattern}")
    base.update(overrides)
    return ScenarioConfig(**base)


CAPTION_L = {1.0: 0.07, 10.0: 0.22, 100.0: 0.7}


def builtin_fig8(beta: float, **overrides) -> ScenarioConfig:
    """Condition-number study: single step tau=1, permeability sweep at
    h in {1/40, 1/80}, every scheme estimating kappa_1 each iteration.
    One scenario per beta so the stabilization L tracks its caption value."""
    if beta not in CAPTION_L:
        raise ConfigError(f"no caption parameters for beta={beta!r}")
    schemes = tuple(
        (name, SchemeConfig(kind=cfg.kind, gamma=cfg.gamma, L=cfg.L,
                            omega=cfg.omega, estimate_condition=True))
        for name, cfg in _scheme_quartet(omega=0.7, L=CAPTION_L[beta]))
    base = dict(n_list=(40, 80), problem="manufactured",
                k_list=(1e-2, 1.0, 1e2), pattern=None, k_in=1e-4, k_out=1.0,
                beta_list=(beta,), tau_list=(1.0,), t_end=1.0,
                mu=1.0, cf=1e-5, density_mode=VARIABLE, schemes=schemes,
                out_prefix=f"fig8_b{beta:g}")
    base.update(overrides)
    return ScenarioConfig(**base)


def convergence_study(hs=(20, 40, 80), k: float = 1.0, beta: float = 1.0,
                      kind: str = PICARD) -> List[Tuple[float, float, float]]:
    """Manufactured-solution self-convergence: run tau=h transients on a
    grid ladder and return (h, eL2_p, eL2_u) triples."""
    out = []
    for n in hs:
        tau = 1.0 / n
        grid = build_grid(n, n)
        spec = manufactured_problem(k=k, beta=beta, tau=tau, T=1.0)
        cfg = SchemeConfig(kind=kind)
        state, report = run_transient(grid, spec, cfg)
        if not report.all_converged:
            raise RuntimeError(f"convergence study failed to converge at n={n}")
        ep, eu = measure_errors(grid, spec, state, spec.T)
        out.append((1.0 / n, ep, eu))
    return out
