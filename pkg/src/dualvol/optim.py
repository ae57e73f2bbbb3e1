"""Optimized face centers: a strictly convex QP keeping every triangle center
as close as possible to its circumcenter while (a) staying inside the closed
triangle and (b) keeping every per-tet operator ``D_t @ G_t`` symmetric.

Face centers are parametrized by barycentric coordinates ``B`` (one row per
face of the connectivity, partition of unity, non-negative), which turns the
in-triangle condition into bounds. Symmetry is six linear equations per tet
(rank 3 in exact arithmetic; the redundancy is left to the solver). Edge
centers are fixed midpoints. Tet centers never enter the Laplacian, so they
are chosen afterwards per tet by projecting the tet circumcenter onto the
region where the tet's four hexahedral chunks stay non-negative.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse

from . import qp
from .dual import (CenterSet, _edge_midpoints, divergences_all,
                   face_circumcenters, gradients_all, hex_volumes_all,
                   implied_tensors_all, tet_circumcenters)
from .errors import DegenerateError, OptimizationError
from .mesh import OPPOSITE_FACE, EdgeTable, FaceTable, TetMesh

logger = logging.getLogger(__name__)

#: per-tet vertex pairs whose symmetry equations are emitted, in row order
SYMMETRY_PAIRS = ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3))


@dataclass
class CenterQpMaps:
    """Index bookkeeping of the assembled center QP.

    Variable ``3 * f + j`` is the barycentric coordinate of face ``f`` on its
    j-th (canonical order) vertex. Equality rows: one partition-of-unity row
    per face, then six symmetry rows per tet in :data:`SYMMETRY_PAIRS` order.
    """

    n_faces: int
    n_tets: int

    def var(self, face: int, j: int) -> int:
        return 3 * face + j

    def pou_row(self, face: int) -> int:
        return face

    def symmetry_rows(self, tet: int) -> slice:
        return slice(self.n_faces + 6 * tet, self.n_faces + 6 * tet + 6)


@dataclass
class OptimizationReport:
    """Outcome of the face-center optimization (JSON-serializable)."""

    objective: float
    max_symmetry_residual: float
    min_face_coordinate: float
    moved_face_count: int
    solver_status: str
    solver_iterations: int
    solver_primal_residual: float
    solver_dual_residual: float
    solver_gap: float
    postfacto_fallbacks: int = 0
    timings: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def assemble_center_qp(mesh: TetMesh, faces: FaceTable,
                       edges: EdgeTable, margin: float = 0.0
                       ) -> tuple[qp.QpProblem, CenterQpMaps]:
    """Build the QP over per-face barycentric coordinates.

    Objective ``sum_f |o_f - c_f|^2`` with ``o_f`` the face circumcenter and
    ``c_f = B_f @ V_f``; equalities are partition of unity per face plus the
    six off-diagonal entries of ``L_t - L_t^T`` per tet (linear in B because
    the divergence rows are linear in face centers for fixed midpoints);
    bounds are ``B >= margin``.
    """
    k = faces.n_faces
    m = mesh.n_tets
    n = 3 * k
    vv = mesh.vertices[faces.faces]               # (k, 3 verts, 3)
    o = face_circumcenters(mesh, faces)           # (k, 3)

    blocks = 2.0 * np.einsum("fid,fjd->fij", vv, vv)
    fidx = np.arange(k)
    prow = (3 * fidx[:, None, None] + np.arange(3)[None, :, None])
    pcol = (3 * fidx[:, None, None] + np.arange(3)[None, None, :])
    p_mat = scipy.sparse.coo_matrix(
        (blocks.ravel(), (np.broadcast_to(prow, blocks.shape).ravel(),
                          np.broadcast_to(pcol, blocks.shape).ravel())),
        shape=(n, n)).tocsr()
    q_vec = (-2.0 * np.einsum("fd,fjd->fj", o, vv)).ravel()

    rows = [np.repeat(fidx, 3)]
    cols = [np.arange(n)]
    vals = [np.ones(n)]

    if m:
        g = gradients_all(mesh)                   # (m, 3, 4)
        pts = mesh.vertices[mesh.tets]            # (m, 4, 3)
        # divergence row p depends on the face-F center x via the term
        # 0.5 * cross(x, w[p, F]); with midpoint edges w is half an edge chord
        w = np.zeros((m, 4, 4, 3))
        for p in range(4):
            a, b, c = OPPOSITE_FACE[p]
            w[:, p, c] = 0.5 * (pts[:, b] - pts[:, a])
            w[:, p, a] = 0.5 * (pts[:, c] - pts[:, b])
            w[:, p, b] = 0.5 * (pts[:, a] - pts[:, c])
        gface = faces.tet_to_faces                # (m, 4)
        fverts = mesh.vertices[faces.faces[gface]]  # (m, 4, 3 verts, 3)
        trow0 = k + 6 * np.arange(m)
        for pair_idx, (p, q_) in enumerate(SYMMETRY_PAIRS):
            # d(L[p][q] - L[q][p]) / d(face_F center)
            rvec = 0.5 * (np.cross(w[:, p], g[:, :, q_][:, None, :])
                          - np.cross(w[:, q_], g[:, :, p][:, None, :]))  # (m, 4, 3)
            coef = np.einsum("mfd,mfjd->mfj", rvec, fverts)              # (m, 4, 3)
            rows.append(np.repeat(trow0 + pair_idx, 12))
            cols.append((3 * gface[:, :, None] + np.arange(3)[None, None, :]).ravel())
            vals.append(coef.ravel())

    a_eq = scipy.sparse.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(k + 6 * m, n)).tocsr()
    b_eq = np.concatenate([np.ones(k), np.zeros(6 * m)])
    problem = qp.QpProblem(P=p_mat, q=q_vec, Aeq=a_eq, beq=b_eq,
                           lower=np.full(n, float(margin)),
                           upper=np.full(n, np.inf))
    return problem, CenterQpMaps(n_faces=k, n_tets=m)


def _symmetry_residual(mesh: TetMesh, faces: FaceTable, edges: EdgeTable,
                       centers: CenterSet) -> float:
    """max_t |L_t - L_t^T|_F relative to max_t |L_t|_F."""
    if mesh.n_tets == 0:
        return 0.0
    g = gradients_all(mesh)
    lt = divergences_all(mesh, faces, edges, centers) @ g
    asym = np.linalg.norm(lt - np.swapaxes(lt, 1, 2), axis=(1, 2))
    scale = np.linalg.norm(lt, axis=(1, 2)).max()
    return float(asym.max() / max(scale, 1e-300))


def optimize_face_centers(mesh: TetMesh, faces: FaceTable, edges: EdgeTable,
                          tol: float = 1e-9, max_iter: int = 200000,
                          margin: float = 0.0
                          ) -> tuple[CenterSet, OptimizationReport]:
    """Solve the center QP and return the optimized centers.

    The returned set has midpoint edge centers and tet barycenters as
    placeholder tet centers; run :func:`postfacto_tet_centers` (or
    :func:`build_optimized_centers`) for mass-positive tet centers. Raises
    :class:`OptimizationError` if the solver does not reach ``tol``.
    """
    t0 = time.perf_counter()
    problem, maps = assemble_center_qp(mesh, faces, edges, margin=margin)
    t1 = time.perf_counter()
    solution = qp.solve_qp(problem, tol=tol, max_iter=max_iter)
    t2 = time.perf_counter()
    if solution.status != qp.OPTIMAL:
        raise OptimizationError(
            f"center QP ended with status {solution.status!r} after "
            f"{solution.iterations} iterations (primal {solution.primal_residual:.2e}, "
            f"dual {solution.dual_residual:.2e}, gap {solution.gap:.2e})")

    bary = solution.x.reshape(maps.n_faces, 3)
    vv = mesh.vertices[faces.faces]
    face_centers = np.einsum("fj,fjd->fd", bary, vv)
    centers = CenterSet(_edge_midpoints(mesh, edges), face_centers,
                        mesh.vertices[mesh.tets].mean(axis=1))

    o = face_circumcenters(mesh, faces)
    move = np.linalg.norm(face_centers - o, axis=1)
    objective = float((move ** 2).sum())
    moved = int(np.count_nonzero(move > 1e-8 * max(mesh.bbox_diagonal(), 1e-300)))
    report = OptimizationReport(
        objective=objective,
        max_symmetry_residual=_symmetry_residual(mesh, faces, edges, centers),
        min_face_coordinate=float(bary.min()) if bary.size else 0.0,
        moved_face_count=moved,
        solver_status=solution.status,
        solver_iterations=solution.iterations,
        solver_primal_residual=solution.primal_residual,
        solver_dual_residual=solution.dual_residual,
        solver_gap=solution.gap,
        timings={"qp_assemble": t1 - t0, "qp_solve": t2 - t1},
    )
    return centers, report


def postfacto_tet_centers(mesh: TetMesh, faces: FaceTable, edges: EdgeTable,
                          centers: CenterSet) -> tuple[np.ndarray, int]:
    """Choose tet centers once edge and face centers are fixed.

    Per tet, the circumcenter is projected onto the polyhedron where the
    center stays in the closed tet and all four hexahedral chunk volumes
    (affine in the tet center) are non-negative. Infeasible or degenerate
    tets fall back to their barycenter; the second return value counts them.
    """
    m = mesh.n_tets
    pts = mesh.vertices[mesh.tets]
    centroids = pts.mean(axis=1)
    if m == 0:
        return np.zeros((0, 3)), 0

    # affine chunk volumes: vol_l(c) = const_l + grad_l . c
    basis = np.vstack([np.zeros(3), np.eye(3)])
    vols = np.empty((4, m, 4))
    for kbasis in range(4):
        probe = centers.replace_tet_centers(np.broadcast_to(basis[kbasis], (m, 3)).copy())
        vols[kbasis] = hex_volumes_all(mesh, faces, edges, probe)
    const = vols[0]                       # (m, 4)
    grad = vols[1:] - vols[0]             # (3, m, 4)

    try:
        circum = tet_circumcenters(mesh)
        circum_ok = np.ones(m, dtype=bool)
    except DegenerateError:
        circum = centroids.copy()
        circum_ok = np.zeros(m, dtype=bool)

    g_all = gradients_all(mesh)
    tet_centers = np.empty((m, 3))
    fallbacks = 0
    for t in range(m):
        if not circum_ok[t]:
            tet_centers[t] = centroids[t]
            fallbacks += 1
            continue
        # closed tet: phi_l(x) = 1/4 + grad phi_l . (x - centroid) >= 0
        gcols = g_all[t].T                                   # (4, 3) rows grad phi_l
        h_tet = 0.25 - gcols @ centroids[t]
        # chunk volumes: const + grad . x >= 0
        gv = -grad[:, t, :].T                                # (4, 3)
        hv = const[t]
        gmat = np.vstack([-gcols, gv])
        h = np.concatenate([h_tet, hv])
        x = qp.project_onto_polyhedron(circum[t], gmat, h)
        if x is None:
            tet_centers[t] = centroids[t]
            fallbacks += 1
        else:
            tet_centers[t] = x
    return tet_centers, fallbacks


def build_optimized_centers(mesh: TetMesh, faces: FaceTable, edges: EdgeTable,
                            tol: float = 1e-9, max_iter: int = 200000,
                            margin: float = 0.0
                            ) -> tuple[CenterSet, OptimizationReport]:
    """Full optimized pipeline: face-center QP plus post-facto tet centers."""
    centers, report = optimize_face_centers(mesh, faces, edges, tol=tol,
                                            max_iter=max_iter, margin=margin)
    t0 = time.perf_counter()
    tet_centers, fallbacks = postfacto_tet_centers(mesh, faces, edges, centers)
    report.timings["postfacto"] = time.perf_counter() - t0
    report.postfacto_fallbacks = fallbacks
    if fallbacks:
        logger.info("post-facto tet pass fell back to barycenters on %d tets", fallbacks)
    return centers.replace_tet_centers(tet_centers), report


@dataclass
class DefinitenessReport:
    """Eigenvalue check of the symmetrized implied tensors of every tet."""

    passed: bool
    worst_tet: int
    worst_value: float
    lambda_max: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def verify_definite(mesh: TetMesh, faces: FaceTable, edges: EdgeTable,
                    centers: CenterSet) -> DefinitenessReport:
    """PASS iff every symmetrized implied tensor is positive semi-definite.

    The tolerance is relative: min eigenvalue >= -1e-9 times the largest
    eigenvalue over all tets.
    """
    if mesh.n_tets == 0:
        return DefinitenessReport(True, -1, 0.0, 0.0)
    tensors = implied_tensors_all(mesh, faces, edges, centers)
    sym = 0.5 * (tensors + np.swapaxes(tensors, 1, 2))
    eigs = np.linalg.eigvalsh(sym)
    lam_max = float(eigs[:, -1].max())
    worst = int(np.argmin(eigs[:, 0]))
    worst_val = float(eigs[worst, 0])
    return DefinitenessReport(
        passed=bool(worst_val >= -1e-9 * max(lam_max, 1e-300)),
        worst_tet=worst,
        worst_value=worst_val,
        lambda_max=lam_max,
    )
