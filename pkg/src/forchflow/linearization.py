"""Iteration drivers for the linearization family.

Four schemes solve each backward-Euler step of the nonlinear face/cell
system:

* stabilized lagged scheme ("lscheme"): freezes the speed factor, splits a
  gamma share of the nonlinear term to the right-hand side, and adds an
  L-stabilization L (u^i - u^{i-1});
* Picard: the gamma = 0, L = 0 member (plain frozen-speed fixed point);
* relaxed Picard: Picard followed by convex blending of consecutive
  iterates with weight omega (from the second iterate on, so every blended
  pair already satisfies the linear mass rows exactly);
* Newton: full linearization of the coupled face/cell residual.

All schemes share one stopping rule on the stacked iterate vector
[face fluxes; cell pressures]: ||V_new - V_old||_2 <= tol_a + tol_r ||V_new||_2.
Non-convergence within max_iter is reported, never raised.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from typing import List, Optional, Tuple

import numpy as np

from .grid import Grid
from .physics import ProblemSpec, Constant, PiecewiseCells, density
from . import tpfa
from .tpfa import State, state_vector
from .linalg import factor, solve, condest_1norm, SingularMatrixError

LSCHEME = "LSCHEME"
PICARD = "PICARD"
RELAXED_PICARD = "RELAXED_PICARD"
NEWTON = "NEWTON"
KINDS = (LSCHEME, PICARD, RELAXED_PICARD, NEWTON)

class LinearSolveError(RuntimeError):
    """Inner direct solve failed; message carries the solve context."""


@dataclass(frozen=True)
class SchemeConfig:
    """Scheme choice plus its parameters and stopping controls.

    flux_weighted_stop scales velocity entries of the stopping vector by
    their face area (making them face fluxes); relax_start is the first
    iteration index at which relaxed Picard blends (2 keeps every blended
    pair mass-exact because both operands then come from full solves).
    """
    kind: str
    gamma: float = 0.0
    L: float = 0.0
    omega: float = 1.0
    tol_a: float = 1e-5
    tol_r: float = 1e-5
    max_iter: int = 150
    estimate_condition: bool = False
    flux_weighted_stop: bool = True
    relax_start: int = 2

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown scheme kind {self.kind!r}")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in [0, 1], got {self.gamma}")
        if self.L < 0.0:
            raise ValueError(f"L must be nonnegative, got {self.L}")
        if not 0.0 < self.omega <= 1.0:
            raise ValueError(f"omega must lie in (0, 1], got {self.omega}")
        if self.tol_a < 0.0 or self.tol_r < 0.0 or (self.tol_a == 0.0 and self.tol_r == 0.0):
            raise ValueError("tolerances must be nonnegative and not both zero")
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be at least 1, got {self.max_iter}")
        if self.relax_start < 1:
            raise ValueError(f"relax_start must be at least 1, got {self.relax_start}")

    @property
    def label(self) -> str:
        if self.kind == LSCHEME:
            return f"L-scheme(gamma={self.gamma:g}, L={self.L:g})"
        if self.kind == RELAXED_PICARD:
            return f"relaxed Picard(omega={self.omega:g})"
        return self.kind.capitalize() if self.kind == NEWTON else "Picard"


def lscheme(gamma: float, L: float, **kw) -> SchemeConfig:
    return SchemeConfig(kind=LSCHEME, gamma=gamma, L=L, **kw)


def picard(**kw) -> SchemeConfig:
    return SchemeConfig(kind=PICARD, **kw)


def relaxed_picard(omega: float, **kw) -> SchemeConfig:
    return SchemeConfig(kind=RELAXED_PICARD, omega=omega, **kw)


def newton(**kw) -> SchemeConfig:
    return SchemeConfig(kind=NEWTON, **kw)


@dataclass
class StepReport:
    """Diagnostics of one time step."""
    t: float
    iterations: int
    converged: bool
    update_norms: List[float] = field(default_factory=list)
    condests: List[float] = field(default_factory=list)
    residual_norms: List[float] = field(default_factory=list)  # Newton only
    mass_residual: float = 0.0
    wall_s: float = 0.0


@dataclass
class SolveReport:
    """Aggregate over a transient run."""
    steps: List[StepReport] = field(default_factory=list)
    total_wall_s: float = 0.0

    @property
    def avg_iterations(self) -> float:
        if not self.steps:
            return 0.0
        return float(np.mean([s.iterations for s in self.steps]))

    @property
    def all_converged(self) -> bool:
        return all(s.converged for s in self.steps)

    @property
    def condest_mean(self) -> float:
        vals = [c for s in self.steps for c in s.condests]
        return float(np.mean(vals)) if vals else float("nan")

    @property
    def worst_mass_residual(self) -> float:
        return max((s.mass_residual for s in self.steps), default=0.0)


@dataclass(frozen=True)
class TheoryInputs:
    """Bounds entering the stabilization-parameter estimates: velocity
    magnitude bound M_u, density bounds M_rho >= m_rho, and the density
    Lipschitz constant L_rho."""
    M_u: float
    M_rho: float = 1.0
    m_rho: float = 1.0
    L_rho: float = 0.0

    def __post_init__(self):
        if self.M_u <= 0 or self.M_rho <= 0 or self.m_rho <= 0:
            raise ValueError("bounds must be strictly positive")
        if self.M_rho < self.m_rho:
            raise ValueError("M_rho must dominate m_rho")
        if self.L_rho < 0:
            raise ValueError("L_rho must be nonnegative")


def theory_inputs_from_state(grid: Grid, spec: ProblemSpec, state: State,
                             t: float = 0.0) -> TheoryInputs:
    """Bounds realized by a state: M_u is the maximum reconstructed face
    speed (floored at 1e-16 so a resting state stays admissible), density
    bounds come from the realized pressure range."""
    sx, sy, _, _ = tpfa.face_speeds(grid, state.ux, state.uy)
    M_u = max(float(sx.max()), float(sy.max()), 1e-16)
    law = spec.density_law
    if law.constant_one:
        return TheoryInputs(M_u=M_u, M_rho=1.0, m_rho=1.0, L_rho=0.0)
    px, py = tpfa.face_pressures(grid, state.p, spec.dirichlet_p, t)
    p_min = min(float(state.p.min()), float(px.min()), float(py.min()))
    p_max = max(float(state.p.max()), float(px.max()), float(py.max()))
    return TheoryInputs(
        M_u=M_u,
        M_rho=float(density(law, np.asarray(p_max))),
        m_rho=float(density(law, np.asarray(p_min))),
        L_rho=law.lipschitz_on(p_min, p_max),
    )


def _max_permeability(spec: ProblemSpec) -> float:
    if isinstance(spec.perm, Constant):
        return spec.perm.k
    if isinstance(spec.perm, PiecewiseCells):
        return float(np.max(spec.perm.values))
    raise TypeError(f"unsupported permeability field {type(spec.perm)!r}")


def theoretical_L_bound(theory: TheoryInputs, spec: ProblemSpec,
                        gamma: float) -> float:
    """Stabilization threshold for the variable-density analysis:
    2 k beta^2 M_rho^2 M_u^2 (1 + gamma^2) / mu, with k the (maximal)
    permeability."""
    k = _max_permeability(spec)
    return 2.0 * k * spec.beta ** 2 * theory.M_rho ** 2 * theory.M_u ** 2 \
        * (1.0 + gamma ** 2) / spec.mu


def theoretical_L_bound_simplified(theory: TheoryInputs, spec: ProblemSpec,
                                   gamma: float) -> float:
    """Sharper threshold available when density is constant:
    k beta^2 M_u^2 (1 + gamma)^2 / (2 mu)."""
    k = _max_permeability(spec)
    return k * spec.beta ** 2 * theory.M_u ** 2 * (1.0 + gamma) ** 2 \
        / (2.0 * spec.mu)


def default_L_heuristic(beta: float) -> float:
    """Practical stabilization choice growing with the square root of the
    inertial coefficient: 0.07 sqrt(beta)."""
    return 0.07 * float(np.sqrt(beta))


def stop_check(v_new: np.ndarray, v_old: np.ndarray,
               tol_a: float = 1e-5, tol_r: float = 1e-5) -> bool:
    """Relative-plus-absolute stopping rule on consecutive iterate vectors."""
    if v_new.shape != v_old.shape:
        raise ValueError("iterate vectors must have equal length")
    diff = float(np.linalg.norm(v_new - v_old))
    return diff <= tol_a + tol_r * float(np.linalg.norm(v_new))


def _lagged_parameters(cfg: SchemeConfig) -> Tuple[float, float]:
    if cfg.kind == LSCHEME:
        return cfg.gamma, cfg.L
    return 0.0, 0.0


def solve_time_step(grid: Grid, spec: ProblemSpec, p_old: np.ndarray,
                    warm_start: State, cfg: SchemeConfig,
                    t_n: float) -> Tuple[State, StepReport]:
    """Iterate one scheme on one backward-Euler step, starting from the
    previous time level. Non-convergence is reported in the StepReport."""
    t0 = time.perf_counter()
    report = StepReport(t=t_n, iterations=0, converged=False)
    state = warm_start.copy()
    v_prev = state_vector(grid, state, cfg.flux_weighted_stop)

    if cfg.kind == NEWTON:
        for i in range(1, cfg.max_iter + 1):
            system, R = tpfa.assemble_newton(grid, spec, p_old, state, t_n)
            report.residual_norms.append(float(np.linalg.norm(R)))
            F = _factor_with_context(system.matrix, False, grid, cfg, i)
            if cfg.estimate_condition:
                report.condests.append(condest_1norm(system.matrix, F))
            delta = solve(F, system.rhs)
            state = system.apply_update(state, delta)
            v_new = state_vector(grid, state, cfg.flux_weighted_stop)
            report.update_norms.append(float(np.linalg.norm(v_new - v_prev)))
            report.iterations = i
            if stop_check(v_new, v_prev, cfg.tol_a, cfg.tol_r):
                report.converged = True
                v_prev = v_new
                break
            v_prev = v_new
        report.residual_norms.append(
            float(np.linalg.norm(tpfa.residual(grid, spec, p_old, state, t_n))))
    else:
        gamma, L = _lagged_parameters(cfg)
        for i in range(1, cfg.max_iter + 1):
            system = tpfa.assemble_lscheme(grid, spec, p_old, state, gamma, L, t_n)
            F = _factor_with_context(system.matrix, True, grid, cfg, i)
            if cfg.estimate_condition:
                report.condests.append(condest_1norm(system.matrix, F))
            p_new = solve(F, system.rhs)
            new_state = system.back_substitute(p_new)
            if cfg.kind == RELAXED_PICARD and cfg.omega != 1.0 and i >= cfg.relax_start:
                w = cfg.omega
                new_state = State(
                    p=w * new_state.p + (1.0 - w) * state.p,
                    ux=w * new_state.ux + (1.0 - w) * state.ux,
                    uy=w * new_state.uy + (1.0 - w) * state.uy,
                )
            v_new = state_vector(grid, new_state, cfg.flux_weighted_stop)
            report.update_norms.append(float(np.linalg.norm(v_new - v_prev)))
            state = new_state
            report.iterations = i
            if stop_check(v_new, v_prev, cfg.tol_a, cfg.tol_r):
                report.converged = True
                v_prev = v_new
                break
            v_prev = v_new

    report.mass_residual = tpfa.mass_balance_residual(grid, spec, state, p_old, t_n)
    report.wall_s = time.perf_counter() - t0
    return state, report


def _factor_with_context(matrix, spd: bool, grid: Grid, cfg: SchemeConfig,
                         iteration: int):
    try:
        return factor(matrix, spd=spd)
    except SingularMatrixError as err:
        raise LinearSolveError(
            f"direct solve failed at iteration {iteration} of {cfg.label} "
            f"({grid.n_cells} cells, {grid.nx}x{grid.ny} grid, "
            f"matrix order {matrix.shape[0]}): {err}") from err


def initial_state(grid: Grid, spec: ProblemSpec) -> State:
    """Starting point of a transient: initial pressure sampled at cell
    centers and a resting velocity field (pressure is the model's initial
    datum; velocity is derived once iterations begin)."""
    Xc, Yc = grid.cell_centers()
    p0 = np.asarray(spec.initial_p(Xc, Yc), dtype=float)
    if p0.shape != (grid.ny, grid.nx):
        p0 = np.broadcast_to(p0, (grid.ny, grid.nx)).copy()
    return State(p=p0,
                 ux=np.zeros((grid.ny, grid.nx + 1)),
                 uy=np.zeros((grid.ny + 1, grid.nx)))


def run_transient(grid: Grid, spec: ProblemSpec, cfg: SchemeConfig,
                  start: Optional[State] = None) -> Tuple[State, SolveReport]:
    """March backward-Euler steps to T, warm-starting each step with the
    previous solution; a final partial step is shortened if T is not an
    integer multiple of tau."""
    t0 = time.perf_counter()
    state = start.copy() if start is not None else initial_state(grid, spec)
    report = SolveReport()
    t = 0.0
    eps = 1e-12 * max(1.0, spec.T)
    while t < spec.T - eps:
        tau_n = min(spec.tau, spec.T - t)
        step_spec = spec if tau_n == spec.tau else replace(spec, tau=tau_n)
        t_next = t + tau_n
        state, step = solve_time_step(grid, step_spec, state.p.copy(), state,
                                      cfg, t_next)
        report.steps.append(step)
        t = t_next
    report.total_wall_s = time.perf_counter() - t0
    return state, report
