"""One-call assembly of (L, M) for any center strategy, with stage timings."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .dual import (CenterSet, STRATEGIES, compute_centers, laplacian, mass_matrix)
from .linalg import SparseMatrix
from .mesh import EdgeTable, FaceTable, TetMesh, derive_connectivity
from .optim import OptimizationReport, build_optimized_centers

ALL_STRATEGIES = STRATEGIES + ("optimized",)


@dataclass
class BuildResult:
    laplacian: SparseMatrix
    mass: SparseMatrix
    centers: CenterSet
    faces: FaceTable
    edges: EdgeTable
    optimization: OptimizationReport | None
    timings: dict


def build_operators(mesh: TetMesh, strategy, faces: FaceTable | None = None,
                    edges: EdgeTable | None = None, tol: float = 1e-9,
                    max_iter: int = 200000, margin: float = 0.0) -> BuildResult:
    """Assemble Laplacian and mass matrix for a strategy name or CenterSet.

    ``strategy`` is one of ``barycentric``, ``circumcentric``, ``alexa``,
    ``circumsnap``, ``optimized``, or an explicit :class:`CenterSet`.
    """
    timings: dict[str, float] = {}
    t0 = time.perf_counter()
    if faces is None or edges is None:
        faces, edges = derive_connectivity(mesh)
    timings["connectivity"] = time.perf_counter() - t0

    opt_report = None
    t0 = time.perf_counter()
    if isinstance(strategy, CenterSet) or strategy in STRATEGIES:
        centers = compute_centers(mesh, faces, edges, strategy)
    elif strategy == "optimized":
        centers, opt_report = build_optimized_centers(
            mesh, faces, edges, tol=tol, max_iter=max_iter, margin=margin)
        timings.update(opt_report.timings)
    else:
        raise ValueError(f"unknown strategy {strategy!r}; expected one of "
                         f"{ALL_STRATEGIES} or a CenterSet")
    timings["centers"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    lap = laplacian(mesh, faces, edges, centers)
    mass = mass_matrix(mesh, faces, edges, centers)
    timings["assemble"] = time.perf_counter() - t0
    return BuildResult(laplacian=lap, mass=mass, centers=centers, faces=faces,
                       edges=edges, optimization=opt_report, timings=timings)


def probe_function(mesh: TetMesh) -> np.ndarray:
    """Fixed sinusoidal per-vertex probe used by the continuity experiments.

    f_i = sin(2 pi (x + 2y + 4z) / d) with d the bounding-box diagonal of the
    mesh; deterministic and non-axis-aligned.
    """
    d = max(mesh.bbox_diagonal(), 1e-300)
    v = mesh.vertices
    return np.sin(2.0 * np.pi * (v[:, 0] + 2.0 * v[:, 1] + 4.0 * v[:, 2]) / d)
