"""Divergence-free virtual element Stokes solver on polygonal meshes with
classical, enhanced and reconstruction-based right-hand sides."""
from .errors import (
    AssemblyError, InfeasibleConstraints, NotStarShaped, OrderTooHigh, ParseError,
    PolystokesError, RankError, SingularLocalSystem, SolverFailure, TopologyError,
    UnsupportedDegree,
)
from .harness import ExperimentSpec, ResultRow, compute_rates, emit_csv, run_experiment
from .mesh import (
    PolygonalMesh, ShapeReport, SubTriangulation, build_paper_mesh, check_shape_regularity,
    geometry, load_mesh, save_mesh, subtriangulate,
)
from .reconstruction import Reconstruction, RTSpace, build_constraints, rt_interpolate_polynomial
from .stokes import (
    Discretization, RhsMode, StokesProblem, apply_dirichlet, assemble, consistency_dual_norm,
    error_pressure, error_velocity, solve, solve_problem,
)
from .vem import DofLayout, VemElement

__all__ = [
    "AssemblyError", "InfeasibleConstraints", "NotStarShaped", "OrderTooHigh", "ParseError",
    "PolystokesError", "RankError", "SingularLocalSystem", "SolverFailure", "TopologyError",
    "UnsupportedDegree", "ExperimentSpec", "ResultRow", "compute_rates", "emit_csv",
    "run_experiment", "PolygonalMesh", "ShapeReport", "SubTriangulation", "build_paper_mesh",
    "check_shape_regularity", "geometry", "load_mesh", "save_mesh", "subtriangulate",
    "Reconstruction", "RTSpace", "build_constraints", "rt_interpolate_polynomial",
    "Discretization", "RhsMode", "StokesProblem", "apply_dirichlet", "assemble",
    "consistency_dual_norm", "error_pressure", "error_velocity", "solve", "solve_problem",
    "DofLayout",
    "VemElement",
]
