"""Staggered Cartesian mesh: cell-centered pressures, face-normal velocities.

Index conventions (row = y index j, column = x index i):
  cells    shape (ny, nx)
  x-faces  shape (ny, nx + 1), face (i, j) sits between cells (i-1, j) and (i, j)
  y-faces  shape (ny + 1, nx), face (i, j) sits between cells (i, j-1) and (i, j)

Flat cell index is x-fastest: flat = j * nx + i.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

X, Y = 0, 1


class CellId(NamedTuple):
    i: int
    j: int


class FaceId(NamedTuple):
    axis: int  # X or Y
    i: int
    j: int


@dataclass(frozen=True)
class Grid:
    nx: int
    ny: int
    domain: tuple[float, float, float, float]  # (x0, x1, y0, y1)
    hx: float
    hy: float

    @property
    def n_cells(self) -> int:
        return self.nx * self.ny

    @property
    def cell_volume(self) -> float:
        return self.hx * self.hy

    def cell_flat(self, c: CellId) -> int:
        if not (0 <= c.i < self.nx and 0 <= c.j < self.ny):
            raise IndexError(f"cell {c} outside [0,{self.nx})x[0,{self.ny})")
        return c.j * self.nx + c.i

    def cell_from_flat(self, flat: int) -> CellId:
        if not 0 <= flat < self.n_cells:
            raise IndexError(f"flat index {flat} outside [0,{self.n_cells})")
        return CellId(flat % self.nx, flat // self.nx)

    def cell_center(self, c: CellId) -> tuple[float, float]:
        x0, _, y0, _ = self.domain
        return x0 + (c.i + 0.5) * self.hx, y0 + (c.j + 0.5) * self.hy

    def cell_centers(self) -> tuple[np.ndarray, np.ndarray]:
        """Meshgrid arrays of cell-center coordinates, shape (ny, nx)."""
        x0, _, y0, _ = self.domain
        xc = x0 + (np.arange(self.nx) + 0.5) * self.hx
        yc = y0 + (np.arange(self.ny) + 0.5) * self.hy
        return np.meshgrid(xc, yc)

    def xface_coords(self) -> tuple[np.ndarray, np.ndarray]:
        """Meshgrid arrays of x-face midpoint coordinates, shape (ny, nx+1)."""
        x0, _, y0, _ = self.domain
        xf = x0 + np.arange(self.nx + 1) * self.hx
        yc = y0 + (np.arange(self.ny) + 0.5) * self.hy
        return np.meshgrid(xf, yc)

    def yface_coords(self) -> tuple[np.ndarray, np.ndarray]:
        """Meshgrid arrays of y-face midpoint coordinates, shape (ny+1, nx)."""
        x0, _, y0, _ = self.domain
        xc = x0 + (np.arange(self.nx) + 0.5) * self.hx
        yf = y0 + np.arange(self.ny + 1) * self.hy
        return np.meshgrid(xc, yf)

    def is_interior_face(self, f: FaceId) -> bool:
        if f.axis == X:
            return 1 <= f.i <= self.nx - 1 and 0 <= f.j < self.ny
        return 0 <= f.i < self.nx and 1 <= f.j <= self.ny - 1

    def is_boundary_face(self, f: FaceId) -> bool:
        if f.axis == X:
            return f.i in (0, self.nx) and 0 <= f.j < self.ny
        return f.j in (0, self.ny) and 0 <= f.i < self.nx

    def face_cells(self, f: FaceId) -> list[CellId]:
        """Adjacent cells, low side first; one cell for boundary faces."""
        if f.axis == X:
            cells = [CellId(f.i - 1, f.j), CellId(f.i, f.j)]
            return [c for c in cells if 0 <= c.i < self.nx]
        cells = [CellId(f.i, f.j - 1), CellId(f.i, f.j)]
        return [c for c in cells if 0 <= c.j < self.ny]

    def cell_faces(self, c: CellId) -> dict[str, FaceId]:
        return {
            "W": FaceId(X, c.i, c.j),
            "E": FaceId(X, c.i + 1, c.j),
            "S": FaceId(Y, c.i, c.j),
            "N": FaceId(Y, c.i, c.j + 1),
        }

    def face_distance(self, f: FaceId) -> float:
        """Pressure-gradient distance across the face: full cell width for
        interior faces, half width for Dirichlet boundary faces."""
        if f.axis == X:
            return self.hx if self.is_interior_face(f) else self.hx / 2.0
        return self.hy if self.is_interior_face(f) else self.hy / 2.0

    def interior_xface_count(self) -> int:
        return (self.nx - 1) * self.ny

    def interior_yface_count(self) -> int:
        return self.nx * (self.ny - 1)


def build_grid(nx: int, ny: int,
               domain: tuple[float, float, float, float] = (0.0, 1.0, 0.0, 1.0)) -> Grid:
    """Construct a staggered grid over the rectangle (x0, x1) x (y0, y1)."""
    x0, x1, y0, y1 = domain
    if nx < 1 or ny < 1:
        raise ValueError(f"cell counts must be >= 1, got nx={nx}, ny={ny}")
    if not (x1 > x0 and y1 > y0):
        raise ValueError(f"degenerate domain {domain}")
    return Grid(nx=nx, ny=ny, domain=(x0, x1, y0, y1),
                hx=(x1 - x0) / nx, hy=(y1 - y0) / ny)


def transverse_face_stencil(grid: Grid, f: FaceId) -> list[tuple[FaceId, float]]:
    """Faces of the orthogonal axis nearest to f, with averaging weights.

    An x-face is surrounded by the four y-faces of its two adjacent cells
    (weights 1/4). Where an adjacent cell does not exist (face on the
    x-boundary, or degenerate 1-cell-wide grids) the missing pair is dropped
    and the weights renormalize to 1/2 each.
    """
    out: list[tuple[FaceId, float]] = []
    if f.axis == X:
        cols = [c for c in (f.i - 1, f.i) if 0 <= c < grid.nx]
        for ci in cols:
            out.append((FaceId(Y, ci, f.j), 1.0))
            out.append((FaceId(Y, ci, f.j + 1), 1.0))
    else:
        rows = [r for r in (f.j - 1, f.j) if 0 <= r < grid.ny]
        for rj in rows:
            out.append((FaceId(X, f.i, rj), 1.0))
            out.append((FaceId(X, f.i + 1, rj), 1.0))
    w = 1.0 / len(out)
    return [(fid, w) for fid, _ in out]
