"""dualvol: finite-volume mass and Laplacian matrices for tetrahedral meshes.

Dual volumes are built from per-simplex centers (barycentric, circumcentric,
two snapping variants, or convex-optimized centers that guarantee a symmetric
negative semi-definite Laplacian and a positive mass matrix).
"""

from .dual import (CenterSet, LocalOperators, PropertyReport, STRATEGIES,
                   compute_centers, divergence_matrix, gradient_matrix,
                   hex_volume, hexahedron, implied_tensor, laplacian,
                   local_operators, mass_matrix, property_report)
from .errors import (ConvergenceError, DegenerateError, DualvolError,
                     NonManifoldError, NotSpdError, OptimizationError,
                     ParseError, PositivityError)
from .linalg import (EigenResult, SparseMatrix, assemble, eigensolve_generalized,
                     eigensolve_sym, read_matrixmarket, read_vector_csv,
                     solve_spd, write_matrixmarket, write_vector_csv)
from .medit import load_medit, save_medit
from .mesh import (EdgeTable, FaceTable, TetMesh, barycenter, barycentric_coords,
                   circumcenter, derive_connectivity, make_grid, perturb,
                   signed_volume)
from .optim import (CenterQpMaps, DefinitenessReport, OptimizationReport,
                    assemble_center_qp, build_optimized_centers,
                    optimize_face_centers, postfacto_tet_centers, verify_definite)
from .pipeline import ALL_STRATEGIES, BuildResult, build_operators, probe_function
from .qp import QpProblem, QpSolution, project_onto_polyhedron, solve_qp

__version__ = "0.1.0"

__all__ = [
    "ALL_STRATEGIES", "BuildResult", "CenterQpMaps", "CenterSet",
    "ConvergenceError", "DefinitenessReport", "DegenerateError", "DualvolError",
    "EdgeTable", "EigenResult", "FaceTable", "LocalOperators",
    "NonManifoldError", "NotSpdError", "OptimizationError", "OptimizationReport",
    "ParseError", "PositivityError", "PropertyReport", "QpProblem", "QpSolution",
    "STRATEGIES", "SparseMatrix", "TetMesh", "assemble", "assemble_center_qp",
    "barycenter", "barycentric_coords", "build_operators",
    "build_optimized_centers", "circumcenter", "compute_centers",
    "derive_connectivity", "divergence_matrix", "eigensolve_generalized",
    "eigensolve_sym", "gradient_matrix", "hex_volume", "hexahedron",
    "implied_tensor", "laplacian", "load_medit", "local_operators", "make_grid",
    "mass_matrix", "optimize_face_centers", "perturb", "postfacto_tet_centers",
    "probe_function", "project_onto_polyhedron", "property_report",
    "read_matrixmarket", "read_vector_csv", "save_medit", "signed_volume",
    "solve_qp", "solve_spd", "verify_definite", "write_matrixmarket",
    "write_vector_csv",
]
