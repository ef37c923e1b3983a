"""Finite-volume solvers and linearization-scheme benchmarks for slightly
compressible Darcy-Forchheimer flow on staggered 2-D grids."""

__version__ = "0.1.0"

from .grid import Grid, FaceId, CellId, build_grid, transverse_face_stencil
from .physics import (ProblemSpec, DensityLaw, Constant, PiecewiseCells,
                      permeability_pattern, manufactured_problem,
                      crossflow_problem)
from .tpfa import State, FrozenCoefficients, AssembledSystem
from .linearization import (SchemeConfig, SolveReport, StepReport,
                            TheoryInputs, solve_time_step, run_transient,
                            stop_check, theoretical_L_bound,
                            theoretical_L_bound_simplified,
                            default_L_heuristic, lscheme, picard,
                            relaxed_picard, newton)
from .linalg import factor, solve, condest_1norm, norm1, SingularMatrixError

__all__ = [
    "Grid", "FaceId", "CellId", "build_grid", "transverse_face_stencil",
    "ProblemSpec", "DensityLaw", "Constant", "PiecewiseCells",
    "permeability_pattern", "manufactured_problem", "crossflow_problem",
    "State", "FrozenCoefficients", "AssembledSystem",
    "SchemeConfig", "SolveReport", "StepReport", "TheoryInputs",
    "solve_time_step", "run_transient", "stop_check",
    "theoretical_L_bound", "theoretical_L_bound_simplified",
    "default_L_heuristic", "lscheme", "picard", "relaxed_picard", "newton",
    "factor", "solve", "condest_1norm", "norm1", "SingularMatrixError",
    "__version__",
]
