"""Dual-volume construction: simplex centers, local operators, global M and L.

Every tetrahedron t donates one hexahedral chunk of its volume to each of its
four vertices. The chunk's eight corners are the vertex itself, the centers
of the three incident edges, the centers of the three incident triangles,
and the tet center (cube combinatorics). The diagonal mass matrix sums the
signed chunk volumes; the Laplacian is assembled from per-tet gradient and
integrated-divergence factors ``L_t = D_t @ G_t``.

Row i of ``D_t`` is the vector area of the interface separating vertex i's
chunk from the other three chunks inside t. That interface's boundary is the
closed 6-point loop alternating edge and face centers around vertex i, so by
Stokes the row equals ``0.5 * sum(x_j cross x_{j+1})`` over the loop. The
loop orientation (see ``OPPOSITE_FACE``) is fixed once by requiring that
barycentric centers reproduce the linear finite-element Laplacian
``L_t = -V_t * G_t^T @ G_t``. Consequences used elsewhere:

* the tet center never enters ``D_t`` (only the mass matrix sees it),
* ``D_t`` is exactly linear in the face centers for fixed edge centers,
* column sums of ``D_t`` vanish, hence ``L @ 1 = 0`` and affine functions
  are exactly harmonic at interior vertices for any centers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateError
from .linalg import SparseMatrix, assemble, eigensolve_sym
from .mesh import (CIRCUMCENTER_COND_LIMIT, LOCAL_EDGES, OPPOSITE_FACE, EdgeTable,
                   FaceTable, TetMesh, boundary_vertex_mask)

#: center strategies computable from geometry alone
STRATEGIES = ("barycentric", "circumcentric", "alexa", "circumsnap")

# Treat |violation| below this times the simplex diameter as "inside", so
# centers exactly on a simplex boundary (regular grids) do not snap.
INSIDE_REL_TOL = 1e-12

# Corner order of the hexahedral chunk for (tet t, local vertex l) with
# (a, b, c) = OPPOSITE_FACE[l]:
#   0: vertex l   1: edge(l,a)  2: edge(l,b)  3: edge(l,c)
#   4: face(l,a,b)  5: face(l,a,c)  6: face(l,b,c)  7: tet center
# The six quads below are oriented outward for a positively oriented tet.
HEX_QUADS = (
    (0, 2, 4, 1),  # on face (l, a, b)
    (0, 1, 5, 3),  # on face (l, a, c)
    (0, 3, 6, 2),  # on face (l, b, c)
    (1, 4, 7, 5),  # interface towards vertex a
    (2, 6, 7, 4),  # interface towards vertex b
    (3, 5, 7, 6),  # interface towards vertex c
)


@dataclass
class CenterSet:
    """One point per edge, face, and tet; vertices are their own centers."""

    edge_centers: np.ndarray
    face_centers: np.ndarray
    tet_centers: np.ndarray

    def __post_init__(self):
        for name in ("edge_centers", "face_centers", "tet_centers"):
            arr = np.ascontiguousarray(np.asarray(getattr(self, name), dtype=np.float64))
            if arr.ndim != 2 or arr.shape[1] != 3 or not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} must be a finite (k, 3) array")
            setattr(self, name, arr)

    def validate_against(self, mesh: TetMesh, faces: FaceTable, edges: EdgeTable):
        if (len(self.edge_centers) != edges.n_edges
                or len(self.face_centers) != faces.n_faces
                or len(self.tet_centers) != mesh.n_tets):
            raise ValueError("center set sizes do not match the mesh connectivity")

    def replace_tet_centers(self, tet_centers: np.ndarray) -> "CenterSet":
        return CenterSet(self.edge_centers.copy(), self.face_centers.copy(), tet_centers)


@dataclass
class LocalOperators:
    """Per-tet gradient, integrated divergence, Laplacian, implied tensor."""

    G: np.ndarray  # (3, 4)
    D: np.ndarray  # (4, 3)
    L: np.ndarray  # (4, 4)
    A: np.ndarray  # (3, 3)


def gradient_matrix(points) -> np.ndarray:
    """Gradients of the four linear hat functions of a tet, columns of (3, 4).

    Satisfies ``G @ 1 = 0`` and ``G @ X = I`` for the (4, 3) vertex matrix X.
    """
    p = np.asarray(points, dtype=np.float64)
    e = (p[1:] - p[0]).T
    det = np.linalg.det(e)
    scale = np.abs(e).max()
    if abs(det) <= 1e-14 * max(scale, 1e-300) ** 3:
        raise DegenerateError("tet too flat for a gradient")
    g = np.empty((3, 4))
    g[:, 1:] = np.linalg.inv(e).T
    g[:, 0] = -g[:, 1:].sum(axis=1)
    return g


def gradients_all(mesh: TetMesh) -> np.ndarray:
    """Batched :func:`gradient_matrix`, shape (m, 3, 4)."""
    p = mesh.vertices[mesh.tets]
    e = np.swapaxes(p[:, 1:, :] - p[:, :1, :], 1, 2)  # (m, 3, 3) columns
    g = np.empty((mesh.n_tets, 3, 4))
    g[:, :, 1:] = np.swapaxes(np.linalg.inv(e), 1, 2)
    g[:, :, 0] = -g[:, :, 1:].sum(axis=2)
    return g


def divergence_matrix(points, edge_centers, face_centers) -> np.ndarray:
    """Integrated divergence D_t (4, 3) of one tet from its simplex centers.

    Parameters
    ----------
    points : (4, 3) array
        Tet vertex positions, positively oriented.
    edge_centers : (6, 3) array
        Centers of the local edges in ``LOCAL_EDGES`` order.
    face_centers : (4, 3) array
        Centers of the faces, ``face_centers[l]`` opposite local vertex l.
    """
    p = np.asarray(points, dtype=np.float64)
    ec = np.asarray(edge_centers, dtype=np.float64)
    fc = np.asarray(face_centers, dtype=np.float64)
    edge_of = {pair: k for k, pair in enumerate(LOCAL_EDGES)}
    d = np.empty((4, 3))
    for l in range(4):
        a, b, c = OPPOSITE_FACE[l]
        loop = np.stack([
            ec[edge_of[tuple(sorted((l, a)))]],
            fc[c],  # face (l, a, b) is opposite c
            ec[edge_of[tuple(sorted((l, b)))]],
            fc[a],
            ec[edge_of[tuple(sorted((l, c)))]],
            fc[b],
        ])
        d[l] = 0.5 * np.cross(loop, np.roll(loop, -1, axis=0)).sum(axis=0)
    return d


def _local_center_arrays(mesh: TetMesh, faces: FaceTable, edges: EdgeTable,
                         centers: CenterSet) -> tuple[np.ndarray, np.ndarray]:
    """Edge centers (m, 6, 3) and opposite-ordered face centers (m, 4, 3)."""
    ec = centers.edge_centers[edges.tet_to_edges]
    fc = centers.face_centers[faces.tet_to_faces]
    return ec, fc


def divergences_all(mesh: TetMesh, faces: FaceTable, edges: EdgeTable,
                    centers: CenterSet) -> np.ndarray:
    """Batched :func:`divergence_matrix`, shape (m, 4, 3)."""
    ec, fc = _local_center_arrays(mesh, faces, edges, centers)
    edge_of = {pair: k for k, pair in enumerate(LOCAL_EDGES)}
    d = np.empty((mesh.n_tets, 4, 3))
    for l in range(4):
        a, b, c = OPPOSITE_FACE[l]
        loop = np.stack([
            ec[:, edge_of[tuple(sorted((l, a)))]],
            fc[:, c],
            ec[:, edge_of[tuple(sorted((l, b)))]],
            fc[:, a],
            ec[:, edge_of[tuple(sorted((l, c)))]],
            fc[:, b],
        ], axis=1)  # (m, 6, 3)
        d[:, l] = 0.5 * np.cross(loop, np.roll(loop, -1, axis=1)).sum(axis=1)
    return d


def implied_tensor(points, d_matrix) -> np.ndarray:
    """Diffusion tensor A with D = -G^T A on range(G^T): -(G G^T)^{-1} G D."""
    g = gradient_matrix(points)
    return -np.linalg.solve(g @ g.T, g @ np.asarray(d_matrix, dtype=np.float64))


def implied_tensors_all(mesh: TetMesh, faces: FaceTable, edges: EdgeTable,
                        centers: CenterSet) -> np.ndarray:
    """Batched implied diffusion tensors, shape (m, 3, 3)."""
    g = gradients_all(mesh)
    d = divergences_all(mesh, faces, edges, centers)
    return -np.linalg.solve(g @ np.swapaxes(g, 1, 2), g @ d)


def local_operators(mesh: TetMesh, faces: FaceTable, edges: EdgeTable,
                    centers: CenterSet, t: int) -> LocalOperators:
    """All four local matrices of tet ``t`` for the given centers."""
    p = mesh.vertices[mesh.tets[t]]
    ec, fc = _local_center_arrays(mesh, faces, edges, centers)
    g = gradient_matrix(p)
    d = divergence_matrix(p, ec[t], fc[t])
    return LocalOperators(G=g, D=d, L=d @ g, A=implied_tensor(p, d))


# ---------------------------------------------------------------------------
# center strategies
# ---------------------------------------------------------------------------

def _edge_midpoints(mesh: TetMesh, edges: EdgeTable) -> np.ndarray:
    return 0.5 * (mesh.vertices[edges.edges[:, 0]] + mesh.vertices[edges.edges[:, 1]])


def _face_points(mesh: TetMesh, faces: FaceTable) -> np.ndarray:
    return mesh.vertices[faces.faces]  # (k, 3, 3)


def face_circumcenters(mesh: TetMesh, faces: FaceTable) -> np.ndarray:
    """Circumcenters of all faces, shape (k, 3); they lie in the face planes."""
    p = _face_points(mesh, faces)
    u = p[:, 1:, :] - p[:, :1, :]  # (k, 2, 3)
    gram = u @ np.swapaxes(u, 1, 2)
    if len(p):
        conds = np.linalg.cond(gram)
        if conds.max() > CIRCUMCENTER_COND_LIMIT:
            raise DegenerateError(
                f"face {int(np.argmax(conds))} circumcenter system ill-conditioned")
    rhs = 0.5 * np.einsum("kij,kij->ki", u, u)
    alpha = np.linalg.solve(gram, rhs[..., None])[..., 0]
    return p[:, 0, :] + np.einsum("ki,kij->kj", alpha, u)


def tet_circumcenters(mesh: TetMesh) -> np.ndarray:
    """Circumcenters of all tets, shape (m, 3)."""
    p = mesh.vertices[mesh.tets]
    e = p[:, 1:, :] - p[:, :1, :]
    a = 2.0 * e
    if len(p):
        conds = np.linalg.cond(a)
        if conds.max() > CIRCUMCENTER_COND_LIMIT:
            raise DegenerateError(
                f"tet {int(np.argmax(conds))} circumcenter system ill-conditioned")
    rhs = np.einsum("kij,kij->ki", e, e)
    return p[:, 0, :] + np.linalg.solve(a, rhs[..., None])[..., 0]


def face_point_barycentrics(mesh: TetMesh, faces: FaceTable,
                            points: np.ndarray) -> np.ndarray:
    """Barycentric coordinates (k, 3) of one in-plane point per face."""
    p = _face_points(mesh, faces)
    u = p[:, 1:, :] - p[:, :1, :]
    gram = u @ np.swapaxes(u, 1, 2)
    rhs = np.einsum("kij,kj->ki", u, points - p[:, 0, :])
    b12 = np.linalg.solve(gram, rhs[..., None])[..., 0]
    return np.column_stack([1.0 - b12.sum(axis=1), b12])


def _face_edge_violations(mesh: TetMesh, faces: FaceTable,
                          points: np.ndarray) -> np.ndarray:
    """Signed distance (k, 3) of each point beyond the edge opposite vertex j.

    Positive means outside that edge's half-plane; computed in-plane as
    ``-b_j * dist(vertex_j, opposite edge line)``.
    """
    p = _face_points(mesh, faces)
    b = face_point_barycentrics(mesh, faces, points)
    area2 = np.linalg.norm(np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]), axis=1)
    viol = np.empty_like(b)
    for j in range(3):
        opp = [x for x in range(3) if x != j]
        elen = np.linalg.norm(p[:, opp[1]] - p[:, opp[0]], axis=1)
        viol[:, j] = -b[:, j] * area2 / elen
    return viol


def _tet_face_violations(mesh: TetMesh, points: np.ndarray,
                         gradients: np.ndarray) -> np.ndarray:
    """Signed distance (m, 4) of each point beyond the plane of face l.

    Positive means outside the tet through the face opposite vertex l. Uses
    the hat-function values: distance = -phi_l(p) / |grad phi_l|.
    """
    p0 = mesh.vertices[mesh.tets[:, 0]]
    rel = points - p0
    phi = np.empty((mesh.n_tets, 4))
    phi[:, 1:] = np.einsum("mij,mj->mi", np.swapaxes(gradients, 1, 2)[:, 1:, :], rel)
    phi[:, 0] = 1.0 - phi[:, 1:].sum(axis=1)
    gnorm = np.linalg.norm(gradients, axis=1)  # (m, 4)
    return -phi / gnorm


def compute_centers(mesh: TetMesh, faces: FaceTable, edges: EdgeTable,
                    strategy) -> CenterSet:
    """Build the centers of all simplices for a named strategy.

    ``strategy`` is one of :data:`STRATEGIES` or an existing
    :class:`CenterSet` (validated and passed through):

    * ``barycentric``: barycenter of every simplex,
    * ``circumcentric``: circumcenter of every simplex,
    * ``alexa``: circumcenters, but any center strictly outside its own
      closed simplex is replaced by that simplex's barycenter (each simplex
      independently; edge midpoints never move),
    * ``circumsnap``: circumcenters snapped recursively to sub-simplex
      circumcenters: a face circumcenter outside the face snaps to the
      midpoint of the edge whose half-plane it violates most, and a tet
      circumcenter outside the tet snaps to the (possibly already snapped)
      center of the face whose supporting plane it violates most. Tet ties
      pick the lowest global face index; face ties the first maximal edge.
    """
    if isinstance(strategy, CenterSet):
        strategy.validate_against(mesh, faces, edges)
        return strategy
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}; expected one of {STRATEGIES}")

    edge_mid = _edge_midpoints(mesh, edges)
    if strategy == "barycentric":
        return CenterSet(edge_mid,
                         _face_points(mesh, faces).mean(axis=1),
                         mesh.vertices[mesh.tets].mean(axis=1))

    face_cc = face_circumcenters(mesh, faces)
    tet_cc = tet_circumcenters(mesh)
    if strategy == "circumcentric":
        return CenterSet(edge_mid, face_cc, tet_cc)

    fscale = np.linalg.norm(np.ptp(_face_points(mesh, faces), axis=1), axis=1)
    fviol = _face_edge_violations(mesh, faces, face_cc)
    face_outside = fviol.max(axis=1) > INSIDE_REL_TOL * fscale

    grads = gradients_all(mesh)
    tp = mesh.vertices[mesh.tets]
    tscale = np.linalg.norm(np.ptp(tp, axis=1), axis=1)
    tviol = _tet_face_violations(mesh, tet_cc, grads)
    tet_outside = tviol.max(axis=1) > INSIDE_REL_TOL * tscale

    if strategy == "alexa":
        face_centers = face_cc.copy()
        face_centers[face_outside] = _face_points(mesh, faces)[face_outside].mean(axis=1)
        tet_centers = tet_cc.copy()
        tet_centers[tet_outside] = tp[tet_outside].mean(axis=1)
        return CenterSet(edge_mid, face_centers, tet_centers)

    # circumsnap
    face_centers = face_cc.copy()
    for f in np.flatnonzero(face_outside):
        worst = int(np.argmax(fviol[f]))  # ties: lowest local j = lowest edge key
        opp = [x for x in range(3) if x != worst]
        va, vb = faces.faces[f][opp]
        face_centers[f] = 0.5 * (mesh.vertices[va] + mesh.vertices[vb])
    tet_centers = tet_cc.copy()
    for t in np.flatnonzero(tet_outside):
        fids = faces.tet_to_faces[t]
        order = np.lexsort((fids, -tviol[t]))  # max violation, ties: lowest face id
        tet_centers[t] = face_centers[fids[order[0]]]
    return CenterSet(edge_mid, face_centers, tet_centers)


# ---------------------------------------------------------------------------
# hexahedral chunks and the mass matrix
# ---------------------------------------------------------------------------

def _hex_corner_keys(mesh: TetMesh, faces: FaceTable, edges: EdgeTable,
                     t: int, l: int) -> np.ndarray:
    """Global, kind-ranked corner keys so shared quads triangulate identically."""
    n_v = mesh.n_vertices
    n_e = edges.n_edges
    n_f = faces.n_faces
    a, b, c = OPPOSITE_FACE[l]
    edge_of = {pair: k for k, pair in enumerate(LOCAL_EDGES)}
    e_ids = [edges.tet_to_edges[t][edge_of[tuple(sorted((l, x)))]] for x in (a, b, c)]
    f_ids = [faces.tet_to_faces[t][x] for x in (c, b, a)]  # faces (l,a,b), (l,a,c), (l,b,c)
    return np.array([mesh.tets[t][l],
                     n_v + e_ids[0], n_v + e_ids[1], n_v + e_ids[2],
                     n_v + n_e + f_ids[0], n_v + n_e + f_ids[1], n_v + n_e + f_ids[2],
                     n_v + n_e + n_f + t], dtype=np.int64)


def hexahedron(mesh: TetMesh, faces: FaceTable, edges: EdgeTable, centers: CenterSet,
               t: int, i: int) -> tuple[np.ndarray, np.ndarray]:
    """Triangulated chunk boundary for (tet t, global vertex i).

    Returns ``(corners, triangles)``: eight corner coordinates and twelve
    outward-oriented triangles indexing them. Each combinatorial quad is split
    along the diagonal at its lowest-global-key corner, a fixed rule shared
    between neighbouring chunks so interior patches cancel exactly.
    """
    tet = mesh.tets[t]
    where = np.flatnonzero(tet == i)
    if len(where) != 1:
        raise ValueError(f"vertex {i} is not a vertex of tet {t}")
    l = int(where[0])
    a, b, c = OPPOSITE_FACE[l]
    edge_of = {pair: k for k, pair in enumerate(LOCAL_EDGES)}
    ec = centers.edge_centers[edges.tet_to_edges[t]]
    fc = centers.face_centers[faces.tet_to_faces[t]]
    corners = np.stack([
        mesh.vertices[i],
        ec[edge_of[tuple(sorted((l, a)))]],
        ec[edge_of[tuple(sorted((l, b)))]],
        ec[edge_of[tuple(sorted((l, c)))]],
        fc[c], fc[b], fc[a],
        centers.tet_centers[t],
    ])
    keys = _hex_corner_keys(mesh, faces, edges, t, l)
    triangles = []
    for quad in HEX_QUADS:
        start = int(np.argmin(keys[list(quad)]))
        q = [quad[(start + s) % 4] for s in range(4)]
        triangles.append((q[0], q[1], q[2]))
        triangles.append((q[0], q[2], q[3]))
    return corners, np.array(triangles, dtype=np.int64)


def hex_volume(surface: tuple[np.ndarray, np.ndarray]) -> float:
    """Signed volume enclosed by a triangulated surface (divergence theorem)."""
    corners, triangles = surface
    p = np.asarray(corners, dtype=np.float64)[np.asarray(triangles, dtype=np.int64)]
    return float(np.einsum("tj,tj->t", p[:, 0], np.cross(p[:, 1], p[:, 2])).sum() / 6.0)


def hex_volumes_all(mesh: TetMesh, faces: FaceTable, edges: EdgeTable,
                    centers: CenterSet) -> np.ndarray:
    """Signed chunk volumes, shape (m, 4), via the same quad decomposition."""
    m = mesh.n_tets
    ec, fc = _local_center_arrays(mesh, faces, edges, centers)
    edge_of = {pair: k for k, pair in enumerate(LOCAL_EDGES)}
    n_v, n_e, n_f = mesh.n_vertices, edges.n_edges, faces.n_faces
    vols = np.zeros((m, 4))
    for l in range(4):
        a, b, c = OPPOSITE_FACE[l]
        e_loc = [edge_of[tuple(sorted((l, x)))] for x in (a, b, c)]
        corners = np.empty((m, 8, 3))
        corners[:, 0] = mesh.vertices[mesh.tets[:, l]]
        corners[:, 1] = ec[:, e_loc[0]]
        corners[:, 2] = ec[:, e_loc[1]]
        corners[:, 3] = ec[:, e_loc[2]]
        corners[:, 4] = fc[:, c]
        corners[:, 5] = fc[:, b]
        corners[:, 6] = fc[:, a]
        corners[:, 7] = centers.tet_centers
        keys = np.empty((m, 8), dtype=np.int64)
        keys[:, 0] = mesh.tets[:, l]
        for s in range(3):
            keys[:, 1 + s] = n_v + edges.tet_to_edges[:, e_loc[s]]
        keys[:, 4] = n_v + n_e + faces.tet_to_faces[:, c]
        keys[:, 5] = n_v + n_e + faces.tet_to_faces[:, b]
        keys[:, 6] = n_v + n_e + faces.tet_to_faces[:, a]
        keys[:, 7] = n_v + n_e + n_f + np.arange(m)
        for quad in HEX_QUADS:
            qk = keys[:, list(quad)]
            start = np.argmin(qk, axis=1)  # (m,)
            q = np.array(quad, dtype=np.int64)
            rot = q[(start[:, None] + np.arange(4)[None, :]) % 4]  # (m, 4)
            pts = np.take_along_axis(corners, rot[:, :, None], axis=1)  # (m, 4, 3)
            vols[:, l] += np.einsum("mj,mj->m", pts[:, 0],
                                    np.cross(pts[:, 1], pts[:, 2])) / 6.0
            vols[:, l] += np.einsum("mj,mj->m", pts[:, 0],
                                    np.cross(pts[:, 2], pts[:, 3])) / 6.0
    return vols


def mass_matrix(mesh: TetMesh, faces: FaceTable, edges: EdgeTable,
                centers: CenterSet) -> SparseMatrix:
    """Diagonal lumped mass matrix; entries may be negative and are reported
    as-is (diagnosing that is the point of :func:`property_report`)."""
    centers.validate_against(mesh, faces, edges)
    vols = hex_volumes_all(mesh, faces, edges, centers)
    diag = np.zeros(mesh.n_vertices)
    np.add.at(diag, mesh.tets, vols)
    n = mesh.n_vertices
    idx = np.arange(n)
    return assemble((idx, idx, diag), n)


def laplacian(mesh: TetMesh, faces: FaceTable, edges: EdgeTable,
              centers: CenterSet) -> SparseMatrix:
    """Assembled n x n Laplacian (negative semi-definite sign convention)."""
    centers.validate_against(mesh, faces, edges)
    g = gradients_all(mesh)
    d = divergences_all(mesh, faces, edges, centers)
    lt = d @ g  # (m, 4, 4)
    rows = np.repeat(mesh.tets, 4, axis=1).ravel()          # tet-major, row-major
    cols = np.tile(mesh.tets, (1, 4)).ravel()
    return assemble((rows, cols, lt.ravel()), mesh.n_vertices)


@dataclass
class PropertyReport:
    """Numerical health check of an assembled (L, M) pair."""

    n_vertices: int
    symmetry_rel: float
    lambda_min: float | None
    lambda_max: float | None
    kernel_dim: int | None
    nonpositive_mass_count: int
    mass_min: float
    mass_sum: float
    max_interior_linear_residual: float
    laplacian_inf_norm: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def property_report(mesh: TetMesh, faces: FaceTable, lap: SparseMatrix,
                    mass: SparseMatrix, spectral_limit: int = 3500) -> PropertyReport:
    """Measure the properties the center strategies trade off.

    The spectral fields (extreme eigenvalues of -(L + L^T) and the dimension
    of its numerical kernel, eigenvalues below 1e-8 of the largest) are only
    computed for meshes up to ``spectral_limit`` vertices and are None above.
    """
    n = mesh.n_vertices
    lap_fro = float(np.sqrt((lap.multiply(lap)).sum()))
    asym = lap - lap.T
    asym_fro = float(np.sqrt((asym.multiply(asym)).sum()))
    symmetry_rel = asym_fro / lap_fro if lap_fro > 0 else 0.0

    diag = mass.diagonal()
    nonpos = int(np.count_nonzero(diag <= 0.0))

    lam_min = lam_max = None
    kernel_dim = None
    if n <= spectral_limit:
        neg_energy = -(lap + lap.T).toarray()
        w = eigensolve_sym(neg_energy).eigenvalues
        lam_min = float(w[0])
        lam_max = float(w[-1])
        kernel_dim = int(np.count_nonzero(np.abs(w) < 1e-8 * max(lam_max, 1e-300)))

    interior = ~boundary_vertex_mask(mesh, faces)
    resid = 0.0
    if np.any(interior):
        for axis in range(3):
            r = lap @ mesh.vertices[:, axis]
            resid = max(resid, float(np.abs(r[interior]).max()))

    lap_inf = float(np.abs(lap).sum(axis=1).max()) if lap.nnz else 0.0
    return PropertyReport(
        n_vertices=n,
        symmetry_rel=symmetry_rel,
        lambda_min=lam_min,
        lambda_max=lam_max,
        kernel_dim=kernel_dim,
        nonpositive_mass_count=nonpos,
        mass_min=float(diag.min()) if n else 0.0,
        mass_sum=float(diag.sum()),
        max_interior_linear_residual=resid,
        laplacian_inf_norm=lap_inf,
    )
