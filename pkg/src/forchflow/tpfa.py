"""Backward-Euler TPFA discretization on the staggered grid.

Per interior face the momentum closure (mu/k_f) u + beta rho(p_f) |u_f| u
+ grad p = 0 is linearized by freezing the speed |u_f| (and optionally part
of the nonlinear term) at the previous iterate; per cell the mass balance
p + tau div(u) = p_old + tau f closes the system.

Boundary faces under Dirichlet pressure are not independent unknowns of the
lagged schemes: their velocity follows from the face equation with the
boundary pressure at half-cell distance. The reduced cell-pressure system
eliminates every face locally and stays symmetric positive definite. The
full-linearization path keeps faces and cells coupled because the speed
reconstruction ties each face to its transverse neighbors; boundary-face
rows there are the same BC-resolved face equations, solved simultaneously.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp

from .grid import Grid, FaceId, CellId, X, Y, transverse_face_stencil
from .physics import ProblemSpec, PermeabilityField, density, density_dp

REDUCED = "REDUCED"
COUPLED = "COUPLED"


@dataclass
class State:
    """One time level: cell pressures and face-normal velocities (boundary
    faces carry their BC-resolved values)."""
    p: np.ndarray   # (ny, nx)
    ux: np.ndarray  # (ny, nx+1)
    uy: np.ndarray  # (ny+1, nx)

    def copy(self) -> "State":
        return State(self.p.copy(), self.ux.copy(), self.uy.copy())

    def check_shapes(self, grid: Grid) -> None:
        expect = [(self.p, (grid.ny, grid.nx)), (self.ux, (grid.ny, grid.nx + 1)),
                  (self.uy, (grid.ny + 1, grid.nx))]
        for arr, shape in expect:
            if arr.shape != shape:
                raise ValueError(f"state array shape {arr.shape}, expected {shape}")
            if not np.all(np.isfinite(arr)):
                raise ValueError("state contains non-finite entries")


@dataclass(frozen=True)
class FrozenCoefficients:
    """Per-face linear momentum coefficients a_f u + b_f + grad p = 0 with
    the nonlinear factors frozen at the previous iterate."""
    ax: np.ndarray  # (ny, nx+1)
    ay: np.ndarray  # (ny+1, nx)
    bx: np.ndarray
    by: np.ndarray


@dataclass
class AssembledSystem:
    matrix: sp.csr_matrix
    rhs: np.ndarray
    layout: str
    # REDUCED: maps solved cell pressures to the full state
    back_substitute: Optional[Callable[[np.ndarray], State]] = None
    # COUPLED: maps the stacked correction onto a state
    apply_update: Optional[Callable[[State, np.ndarray], State]] = None


def face_permeabilities(grid: Grid, perm: PermeabilityField):
    """Face permeability arrays: harmonic mean across interior faces,
    adjacent cell value on boundary faces."""
    kc = perm.cell_values(grid)
    kx = np.empty((grid.ny, grid.nx + 1))
    kx[:, 1:-1] = 2.0 * kc[:, :-1] * kc[:, 1:] / (kc[:, :-1] + kc[:, 1:])
    kx[:, 0] = kc[:, 0]
    kx[:, -1] = kc[:, -1]
    ky = np.empty((grid.ny + 1, grid.nx))
    ky[1:-1, :] = 2.0 * kc[:-1, :] * kc[1:, :] / (kc[:-1, :] + kc[1:, :])
    ky[0, :] = kc[0, :]
    ky[-1, :] = kc[-1, :]
    return kx, ky


def face_transmissibility(grid: Grid, perm: PermeabilityField, f: FaceId) -> float:
    """Permeability at one face (harmonic interior, cell value on boundary)."""
    kx, ky = face_permeabilities(grid, perm)
    return float(kx[f.j, f.i] if f.axis == X else ky[f.j, f.i])


def face_speeds(grid: Grid, ux: np.ndarray, uy: np.ndarray):
    """Velocity magnitude at every face from the normal component and the
    averaged transverse neighbors (4-point interior, 2-point at the lateral
    boundaries). Returns (sx, sy, tx, ty) with t* the transverse averages."""
    tx = np.empty_like(ux)
    tx[:, 1:-1] = 0.25 * (uy[:-1, :-1] + uy[:-1, 1:] + uy[1:, :-1] + uy[1:, 1:])
    tx[:, 0] = 0.5 * (uy[:-1, 0] + uy[1:, 0])
    tx[:, -1] = 0.5 * (uy[:-1, -1] + uy[1:, -1])
    ty = np.empty_like(uy)
    ty[1:-1, :] = 0.25 * (ux[:-1, :-1] + ux[:-1, 1:] + ux[1:, :-1] + ux[1:, 1:])
    ty[0, :] = 0.5 * (ux[0, :-1] + ux[0, 1:])
    ty[-1, :] = 0.5 * (ux[-1, :-1] + ux[-1, 1:])
    return np.hypot(ux, tx), np.hypot(uy, ty), tx, ty


def reconstruct_face_speed(grid: Grid, state: State, f: FaceId) -> float:
    """Speed at one face via the transverse stencil (scalar reference path)."""
    normal = state.ux[f.j, f.i] if f.axis == X else state.uy[f.j, f.i]
    transverse = 0.0
    for nb, w in transverse_face_stencil(grid, f):
        val = state.ux[nb.j, nb.i] if nb.axis == X else state.uy[nb.j, nb.i]
        transverse += w * val
    return float(np.hypot(normal, transverse))


def face_pressures(grid: Grid, p: np.ndarray, dirichlet_p, t: float):
    """Pressure at every face: arithmetic mean of adjacent cells inside,
    boundary value at boundary face midpoints."""
    Xf, Yf = grid.xface_coords()
    Xg, Yg = grid.yface_coords()
    px = np.empty((grid.ny, grid.nx + 1))
    px[:, 1:-1] = 0.5 * (p[:, :-1] + p[:, 1:])
    px[:, 0] = dirichlet_p(Xf[:, 0], Yf[:, 0], t)
    px[:, -1] = dirichlet_p(Xf[:, -1], Yf[:, -1], t)
    py = np.empty((grid.ny + 1, grid.nx))
    py[1:-1, :] = 0.5 * (p[:-1, :] + p[1:, :])
    py[0, :] = dirichlet_p(Xg[0, :], Yg[0, :], t)
    py[-1, :] = dirichlet_p(Xg[-1, :], Yg[-1, :], t)
    return px, py


def face_pressure(grid: Grid, state: State, f: FaceId, dirichlet_p, t: float) -> float:
    """Pressure at one face (scalar reference path)."""
    cells = grid.face_cells(f)
    if len(cells) == 2:
        (i0, j0), (i1, j1) = cells
        return float(0.5 * (state.p[j0, i0] + state.p[j1, i1]))
    if f.axis == X:
        xf, yf = grid.xface_coords()
    else:
        xf, yf = grid.yface_coords()
    return float(dirichlet_p(xf[f.j, f.i], yf[f.j, f.i], t))


def boundary_dirichlet(grid: Grid, dirichlet_p, t: float):
    """Boundary pressures at face midpoints: (west, east, south, north)."""
    Xf, Yf = grid.xface_coords()
    Xg, Yg = grid.yface_coords()
    return (np.asarray(dirichlet_p(Xf[:, 0], Yf[:, 0], t), dtype=float),
            np.asarray(dirichlet_p(Xf[:, -1], Yf[:, -1], t), dtype=float),
            np.asarray(dirichlet_p(Xg[0, :], Yg[0, :], t), dtype=float),
            np.asarray(dirichlet_p(Xg[-1, :], Yg[-1, :], t), dtype=float))


def gradient_distances(grid: Grid):
    """Pressure-difference distances per face column/row (half cell at the
    Dirichlet boundary)."""
    dx = np.full(grid.nx + 1, grid.hx)
    dx[0] = dx[-1] = grid.hx / 2.0
    dy = np.full(grid.ny + 1, grid.hy)
    dy[0] = dy[-1] = grid.hy / 2.0
    return dx, dy


def frozen_coefficients(grid: Grid, spec: ProblemSpec, iterate: State,
                        gamma: float, L: float, t_n: float) -> FrozenCoefficients:
    law = spec.density_law
    kx, ky = face_permeabilities(grid, spec.perm)
    sx, sy, _, _ = face_speeds(grid, iterate.ux, iterate.uy)
    px, py = face_pressures(grid, iterate.p, spec.dirichlet_p, t_n)
    rx, ry = density(law, px), density(law, py)
    ax = spec.mu / kx + (1.0 - gamma) * spec.beta * rx * sx + L
    ay = spec.mu / ky + (1.0 - gamma) * spec.beta * ry * sy + L
    bx = gamma * spec.beta * rx * sx * iterate.ux - L * iterate.ux
    by = gamma * spec.beta * ry * sy * iterate.uy - L * iterate.uy
    return FrozenCoefficients(ax=ax, ay=ay, bx=bx, by=by)


def assemble_lscheme(grid: Grid, spec: ProblemSpec, p_old: np.ndarray,
                     iterate: State, gamma: float, L: float,
                     t_n: float) -> AssembledSystem:
    """Reduced SPD cell-pressure system for one lagged-scheme iteration.

    Faces are eliminated locally: u_f = -(grad p + b_f)/a_f substituted into
    the cell mass balance yields transmissibilities T_f = tau/(h a_f d_f)
    coupling adjacent cells. Picard is the gamma = 0, L = 0 member.
    """
    if not (0.0 <= gamma <= 1.0 and L >= 0.0):
        raise ValueError(f"need gamma in [0,1] and L >= 0, got {gamma}, {L}")
    nx, ny, tau = grid.nx, grid.ny, spec.tau
    hx, hy = grid.hx, grid.hy
    coeff = frozen_coefficients(grid, spec, iterate, gamma, L, t_n)
    ax, ay, bx, by = coeff.ax, coeff.ay, coeff.bx, coeff.by
    if not (np.all(ax > 0) and np.all(ay > 0)):
        raise RuntimeError("nonpositive frozen face coefficient")
    dxf, dyf = gradient_distances(grid)
    gW, gE, gS, gN = boundary_dirichlet(grid, spec.dirichlet_p, t_n)

    Tx = tau / (hx * dxf[None, :] * ax)
    Ty = tau / (hy * dyf[:, None] * ay)
    diag = 1.0 + Tx[:, :-1] + Tx[:, 1:] + Ty[:-1, :] + Ty[1:, :]

    idx = np.arange(grid.n_cells).reshape(ny, nx)
    rows = [idx.ravel()]
    cols = [idx.ravel()]
    vals = [diag.ravel()]
    r = idx[:, 1:].ravel(); c = idx[:, :-1].ravel(); v = -Tx[:, 1:-1].ravel()
    rows += [r, c]; cols += [c, r]; vals += [v, v]
    r = idx[1:, :].ravel(); c = idx[:-1, :].ravel(); v = -Ty[1:-1, :].ravel()
    rows += [r, c]; cols += [c, r]; vals += [v, v]
    A = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(grid.n_cells, grid.n_cells)).tocsr()

    Xc, Yc = grid.cell_centers()
    fc = np.asarray(spec.source(Xc, Yc, t_n), dtype=float)
    gx, gy = bx / ax, by / ay
    rhs = (p_old + tau * fc
           + (tau / hx) * (gx[:, 1:] - gx[:, :-1])
           + (tau / hy) * (gy[1:, :] - gy[:-1, :]))
    rhs[:, 0] += Tx[:, 0] * gW
    rhs[:, -1] += Tx[:, -1] * gE
    rhs[0, :] += Ty[0, :] * gS
    rhs[-1, :] += Ty[-1, :] * gN

    def back_substitute(p_new_flat: np.ndarray) -> State:
        p = p_new_flat.reshape(ny, nx)
        ux = np.empty_like(bx)
        uy = np.empty_like(by)
        ux[:, 1:-1] = -((p[:, 1:] - p[:, :-1]) / hx + bx[:, 1:-1]) / ax[:, 1:-1]
        ux[:, 0] = -((p[:, 0] - gW) / dxf[0] + bx[:, 0]) / ax[:, 0]
        ux[:, -1] = -((gE - p[:, -1]) / dxf[-1] + bx[:, -1]) / ax[:, -1]
        uy[1:-1, :] = -((p[1:, :] - p[:-1, :]) / hy + by[1:-1, :]) / ay[1:-1, :]
        uy[0, :] = -((p[0, :] - gS) / dyf[0] + by[0, :]) / ay[0, :]
        uy[-1, :] = -((gN - p[-1, :]) / dyf[-1] + by[-1, :]) / ay[-1, :]
        return State(p=p.copy(), ux=ux, uy=uy)

    return AssembledSystem(matrix=A, rhs=rhs.ravel(), layout=REDUCED,
                           back_substitute=back_substitute)


def _pressure_gradients(grid: Grid, p: np.ndarray, gW, gE, gS, gN):
    dxf, dyf = gradient_distances(grid)
    dpdx = np.empty((grid.ny, grid.nx + 1))
    dpdx[:, 1:-1] = (p[:, 1:] - p[:, :-1]) / grid.hx
    dpdx[:, 0] = (p[:, 0] - gW) / dxf[0]
    dpdx[:, -1] = (gE - p[:, -1]) / dxf[-1]
    dpdy = np.empty((grid.ny + 1, grid.nx))
    dpdy[1:-1, :] = (p[1:, :] - p[:-1, :]) / grid.hy
    dpdy[0, :] = (p[0, :] - gS) / dyf[0]
    dpdy[-1, :] = (gN - p[-1, :]) / dyf[-1]
    return dpdx, dpdy


def residual(grid: Grid, spec: ProblemSpec, p_old: np.ndarray, state: State,
             t_n: float) -> np.ndarray:
    """Nonlinear residual stacked as [x-face rows; y-face rows; cell rows]."""
    law = spec.density_law
    kx, ky = face_permeabilities(grid, spec.perm)
    sx, sy, _, _ = face_speeds(grid, state.ux, state.uy)
    px, py = face_pressures(grid, state.p, spec.dirichlet_p, t_n)
    gW, gE, gS, gN = boundary_dirichlet(grid, spec.dirichlet_p, t_n)
    dpdx, dpdy = _pressure_gradients(grid, state.p, gW, gE, gS, gN)
    Rx = (spec.mu / kx) * state.ux + spec.beta * density(law, px) * sx * state.ux + dpdx
    Ry = (spec.mu / ky) * state.uy + spec.beta * density(law, py) * sy * state.uy + dpdy
    Xc, Yc = grid.cell_centers()
    fc = np.asarray(spec.source(Xc, Yc, t_n), dtype=float)
    Rp = state.p + spec.tau * divergence(grid, state.ux, state.uy) - p_old - spec.tau * fc
    return np.concatenate([Rx.ravel(), Ry.ravel(), Rp.ravel()])


def assemble_newton(grid: Grid, spec: ProblemSpec, p_old: np.ndarray,
                    iterate: State, t_n: float):
    """Coupled Jacobian system J delta = -R for the full linearization.

    Unknown layout [all x-faces; all y-faces; cells]. The face-row diagonal
    carries the |u| self term beta rho (s + u^2/s), zero where s = 0; the
    transverse speed coupling enters with the stencil weights; cell rows are
    the linear mass balance. Returns (system, residual).
    """
    nx, ny, tau = grid.nx, grid.ny, spec.tau
    hx, hy = grid.hx, grid.hy
    law = spec.density_law
    kx, ky = face_permeabilities(grid, spec.perm)
    sx, sy, tx, ty = face_speeds(grid, iterate.ux, iterate.uy)
    px, py = face_pressures(grid, iterate.p, spec.dirichlet_p, t_n)
    rx, ry = density(law, px), density(law, py)
    drx, dry = density_dp(law, px), density_dp(law, py)
    dxf, dyf = gradient_distances(grid)

    nfx = ny * (nx + 1)
    nfy = (ny + 1) * nx
    nc = nx * ny
    ix = np.arange(nfx).reshape(ny, nx + 1)
    iy = nfx + np.arange(nfy).reshape(ny + 1, nx)
    ic = nfx + nfy + np.arange(nc).reshape(ny, nx)
    ntot = nfx + nfy + nc

    R = residual(grid, spec, p_old, iterate, t_n)

    rows: list[np.ndarray] = []
    cols: list[np.ndarray] = []
    vals: list[np.ndarray] = []

    def add(r, c, v):
        r = np.asarray(r).ravel()
        rows.append(r)
        cols.append(np.asarray(c).ravel())
        vals.append(np.broadcast_to(np.asarray(v, dtype=float).ravel()
                                    if np.ndim(v) else float(v), r.shape).copy())

    ux, uy = iterate.ux, iterate.uy
    inv_sx = np.where(sx > 0.0, 1.0 / np.where(sx > 0.0, sx, 1.0), 0.0)
    inv_sy = np.where(sy > 0.0, 1.0 / np.where(sy > 0.0, sy, 1.0), 0.0)

    # x-face rows: self term, transverse coupling, pressure coupling
    add(ix, ix, spec.mu / kx + spec.beta * rx * (sx + ux * ux * inv_sx))
    coef = spec.beta * rx * ux * tx * inv_sx
    quarter = 0.25 * coef[:, 1:-1]
    add(ix[:, 1:-1], iy[:-1, :-1], quarter)
    add(ix[:, 1:-1], iy[:-1, 1:], quarter)
    add(ix[:, 1:-1], iy[1:, :-1], quarter)
    add(ix[:, 1:-1], iy[1:, 1:], quarter)
    add(ix[:, 0], iy[:-1, 0], 0.5 * coef[:, 0])
    add(ix[:, 0], iy[1:, 0], 0.5 * coef[:, 0])
    add(ix[:, -1], iy[:-1, -1], 0.5 * coef[:, -1])
    add(ix[:, -1], iy[1:, -1], 0.5 * coef[:, -1])
    add(ix[:, 1:], ic, np.broadcast_to(-1.0 / dxf[1:], (ny, nx)))
    add(ix[:, :-1], ic, np.broadcast_to(1.0 / dxf[:-1], (ny, nx)))
    dr = spec.beta * drx * sx * ux * 0.5
    add(ix[:, 1:-1], ic[:, :-1], dr[:, 1:-1])
    add(ix[:, 1:-1], ic[:, 1:], dr[:, 1:-1])

    # y-face rows
    add(iy, iy, spec.mu / ky + spec.beta * ry * (sy + uy * uy * inv_sy))
    coef = spec.beta * ry * uy * ty * inv_sy
    quarter = 0.25 * coef[1:-1, :]
    add(iy[1:-1, :], ix[:-1, :-1], quarter)
    add(iy[1:-1, :], ix[:-1, 1:], quarter)
    add(iy[1:-1, :], ix[1:, :-1], quarter)
    add(iy[1:-1, :], ix[1:, 1:], quarter)
    add(iy[0, :], ix[0, :-1], 0.5 * coef[0, :])
    add(iy[0, :], ix[0, 1:], 0.5 * coef[0, :])
    add(iy[-1, :], ix[-1, :-1], 0.5 * coef[-1, :])
    add(iy[-1, :], ix[-1, 1:], 0.5 * coef[-1, :])
    add(iy[1:, :], ic, np.broadcast_to(-1.0 / dyf[1:, None], (ny, nx)))
    add(iy[:-1, :], ic, np.broadcast_to(1.0 / dyf[:-1, None], (ny, nx)))
    dr = spec.beta * dry * sy * uy * 0.5
    add(iy[1:-1, :], ic[:-1, :], dr[1:-1, :])
    add(iy[1:-1, :], ic[1:, :], dr[1:-1, :])

    # cell rows: identity plus tau * divergence
    add(ic, ic, np.ones(nc))
    add(ic, ix[:, 1:], np.full(nc, tau / hx))
    add(ic, ix[:, :-1], np.full(nc, -tau / hx))
    add(ic, iy[1:, :], np.full(nc, tau / hy))
    add(ic, iy[:-1, :], np.full(nc, -tau / hy))

    J = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(ntot, ntot)).tocsr()

    def apply_update(state: State, delta: np.ndarray) -> State:
        return State(
            p=state.p + delta[nfx + nfy:].reshape(ny, nx),
            ux=state.ux + delta[:nfx].reshape(ny, nx + 1),
            uy=state.uy + delta[nfx:nfx + nfy].reshape(ny + 1, nx),
        )

    system = AssembledSystem(matrix=J, rhs=-R, layout=COUPLED,
                             apply_update=apply_update)
    return system, R


def divergence(grid: Grid, ux: np.ndarray, uy: np.ndarray) -> np.ndarray:
    """Discrete divergence per cell from face-normal velocities."""
    return ((ux[:, 1:] - ux[:, :-1]) / grid.hx
            + (uy[1:, :] - uy[:-1, :]) / grid.hy)


def discrete_divergence(grid: Grid, state: State, c: CellId) -> float:
    """Divergence of one cell (scalar reference path)."""
    e = state.ux[c.j, c.i + 1]
    w = state.ux[c.j, c.i]
    n = state.uy[c.j + 1, c.i]
    s = state.uy[c.j, c.i]
    return float((e - w) / grid.hx + (n - s) / grid.hy)


def state_vector(grid: Grid, state: State, flux_weighted: bool = True) -> np.ndarray:
    """Stacked iterate vector [interior x-faces; interior y-faces; cells].

    flux_weighted scales each velocity by its face area, making the entries
    face fluxes, i.e. the natural discrete unknowns of the finite-volume
    form; unweighted stacks raw velocities.
    """
    wx = grid.hy if flux_weighted else 1.0
    wy = grid.hx if flux_weighted else 1.0
    return np.concatenate([
        (wx * state.ux[:, 1:-1]).ravel(),
        (wy * state.uy[1:-1, :]).ravel(),
        state.p.ravel(),
    ])


def mass_balance_residual(grid: Grid, spec: ProblemSpec, state: State,
                          p_old: np.ndarray, t_n: float) -> float:
    """Relative defect of the global balance: storage change plus boundary
    outflow must equal the integrated source.

    The defect is normalized by the gross magnitudes of the three terms
    (sums of absolute contributions), not by their nets: in a flow-through
    problem the net storage, net boundary flow, and source all cancel to
    near zero, and dividing by a cancelled net would report roundoff noise
    as a large relative error."""
    vol = grid.cell_volume
    storage = float(np.sum(state.p - p_old)) * vol / spec.tau
    outflow = (float(np.sum(state.ux[:, -1]) - np.sum(state.ux[:, 0])) * grid.hy
               + float(np.sum(state.uy[-1, :]) - np.sum(state.uy[0, :])) * grid.hx)
    Xc, Yc = grid.cell_centers()
    src = float(np.sum(np.asarray(spec.source(Xc, Yc, t_n), dtype=float))) * vol
    storage_gross = float(np.sum(np.abs(state.p - p_old))) * vol / spec.tau
    flux_gross = ((float(np.sum(np.abs(state.ux[:, -1])))
                   + float(np.sum(np.abs(state.ux[:, 0])))) * grid.hy
                  + (float(np.sum(np.abs(state.uy[-1, :])))
                     + float(np.sum(np.abs(state.uy[0, :])))) * grid.hx)
    src_gross = float(np.sum(np.abs(
        np.asarray(spec.source(Xc, Yc, t_n), dtype=float)))) * vol
    scale = max(storage_gross, flux_gross, src_gross, 1e-300)
    return abs(storage + outflow - src) / scale
