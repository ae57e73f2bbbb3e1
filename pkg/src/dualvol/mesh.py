"""Tetrahedral mesh data structures, geometric primitives, and synthetic meshes.

Conventions used throughout the package:

* vertices are float64 arrays of shape (n, 3); tets are int arrays of shape
  (m, 4) and are always stored positively oriented,
* local edges of a tet follow ``LOCAL_EDGES`` (lexicographic pairs),
* the face opposite local vertex ``l`` is local face ``l``; its outward
  orientation for a positively oriented tet is ``OPPOSITE_FACE[l]``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateError, NonManifoldError

# Local simplex combinatorics of a tet (v0, v1, v2, v3).
LOCAL_EDGES = ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3))
# Outward-oriented vertex order of the face opposite local vertex l
# (an even permutation (l, a, b, c) of (0, 1, 2, 3)).
OPPOSITE_FACE = ((1, 2, 3), (0, 3, 2), (0, 1, 3), (0, 2, 1))

# Tets with |volume| below this times (bbox diagonal)^3 are rejected;
# matches the double-precision conditioning of circumcenter systems.
DEGENERACY_REL_TOL = 1e-14

# Circumcenter linear systems with condition number above this raise.
CIRCUMCENTER_COND_LIMIT = 1e12


def _as_points(a, rows: int | None = None) -> np.ndarray:
    p = np.ascontiguousarray(np.asarray(a, dtype=np.float64))
    if p.ndim != 2 or p.shape[1] != 3:
        raise ValueError(f"expected (n, 3) coordinate array, got shape {p.shape}")
    if rows is not None and p.shape[0] != rows:
        raise ValueError(f"expected {rows} points, got {p.shape[0]}")
    if not np.all(np.isfinite(p)):
        raise ValueError("coordinates must be finite")
    return p


def signed_volume(p0, p1, p2, p3) -> float:
    """Signed volume of the tet (p0, p1, p2, p3): det[p1-p0, p2-p0, p3-p0] / 6."""
    p0 = np.asarray(p0, dtype=np.float64)
    e = np.stack([np.asarray(p1, float) - p0,
                  np.asarray(p2, float) - p0,
                  np.asarray(p3, float) - p0])
    return float(np.linalg.det(e)) / 6.0


def tet_volumes(vertices: np.ndarray, tets: np.ndarray) -> np.ndarray:
    """Signed volumes of all tets, shape (m,)."""
    p = vertices[tets]  # (m, 4, 3)
    e = p[:, 1:, :] - p[:, :1, :]
    return np.linalg.det(e) / 6.0


@dataclass
class TetMesh:
    """Immutable tetrahedral mesh: positions, positively-oriented tets, labels.

    Parameters
    ----------
    vertices : array_like
        Vertex coordinates, shape (n, 3); must be finite.
    tets : array_like
        Vertex indices, shape (m, 4). Negatively oriented tets are repaired
        by swapping the last two indices; near-zero-volume tets raise
        :class:`DegenerateError`.
    vertex_labels : array_like, optional
        Integer label per vertex (used for boundary-condition tagging).
    """

    vertices: np.ndarray
    tets: np.ndarray
    vertex_labels: np.ndarray | None = None

    def __post_init__(self):
        self.vertices = _as_points(self.vertices)
        tets = np.ascontiguousarray(np.asarray(self.tets, dtype=np.int64))
        if tets.size == 0:
            tets = tets.reshape(0, 4)
        if tets.ndim != 2 or tets.shape[1] != 4:
            raise ValueError(f"expected (m, 4) tet array, got shape {tets.shape}")
        n = len(self.vertices)
        if tets.size and (tets.min() < 0 or tets.max() >= n):
            raise IndexError(f"tet vertex index out of range [0, {n})")
        for t, tet in enumerate(tets):
            if len(set(tet.tolist())) != 4:
                raise ValueError(f"tet {t} repeats a vertex index")
        if tets.size:
            vols = tet_volumes(self.vertices, tets)
            neg = vols < 0
            if np.any(neg):
                tets = tets.copy()
                tets[neg] = tets[neg][:, [0, 1, 3, 2]]
                vols = np.abs(vols)
            tol = DEGENERACY_REL_TOL * self.bbox_diagonal() ** 3
            if np.any(vols < tol):
                t = int(np.argmin(vols))
                raise DegenerateError(
                    f"tet {t} has |volume| {vols[t]:.3e} below tolerance {tol:.3e}")
        self.tets = tets
        if self.vertex_labels is not None:
            labels = np.ascontiguousarray(np.asarray(self.vertex_labels, dtype=np.int64))
            if labels.shape != (n,):
                raise ValueError(f"expected {n} vertex labels, got shape {labels.shape}")
            self.vertex_labels = labels
        for a in (self.vertices, self.tets, self.vertex_labels):
            if a is not None:
                a.flags.writeable = False

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_tets(self) -> int:
        return len(self.tets)

    def bbox_diagonal(self) -> float:
        if self.n_vertices == 0:
            return 0.0
        span = self.vertices.max(axis=0) - self.vertices.min(axis=0)
        return float(np.linalg.norm(span))

    def volumes(self) -> np.ndarray:
        return tet_volumes(self.vertices, self.tets)

    def total_volume(self) -> float:
        return float(self.volumes().sum())

    def labels_or_zeros(self) -> np.ndarray:
        if self.vertex_labels is not None:
            return self.vertex_labels
        return np.zeros(self.n_vertices, dtype=np.int64)

    def with_vertices(self, vertices: np.ndarray) -> "TetMesh":
        """Same connectivity and labels over new vertex positions."""
        return TetMesh(vertices, self.tets.copy(), None if self.vertex_labels is None
                       else self.vertex_labels.copy())

    def __eq__(self, other) -> bool:
        if not isinstance(other, TetMesh):
            return NotImplemented
        if not (np.array_equal(self.vertices, other.vertices)
                and np.array_equal(self.tets, other.tets)):
            return False
        return np.array_equal(self.labels_or_zeros(), other.labels_or_zeros())


@dataclass
class FaceTable:
    """Unique triangle faces in deterministic (lexicographic) order.

    ``faces[f]`` is the sorted vertex triple of face f. ``tet_to_faces[t, l]``
    is the face opposite local vertex l of tet t and ``tet_face_signs[t, l]``
    is +1 when the tet sees that face in its canonical (sorted) orientation.
    ``face_to_tets[f]`` holds one or two incident tets (-1 padding).
    """

    faces: np.ndarray
    tet_to_faces: np.ndarray
    tet_face_signs: np.ndarray
    face_to_tets: np.ndarray

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    def boundary_mask(self) -> np.ndarray:
        """True for faces with exactly one incident tet."""
        return self.face_to_tets[:, 1] < 0


@dataclass
class EdgeTable:
    """Unique edges (sorted pairs, lexicographic order) and per-tet edge ids."""

    edges: np.ndarray
    tet_to_edges: np.ndarray

    @property
    def n_edges(self) -> int:
        return len(self.edges)


def _permutation_parity(perm) -> int:
    """+1 for even permutations, -1 for odd (tiny inputs only)."""
    perm = list(perm)
    parity = 1
    for i in range(len(perm)):
        while perm[i] != i:
            j = perm[i]
            perm[i], perm[j] = perm[j], perm[i]
            parity = -parity
    return parity


def derive_connectivity(mesh: TetMesh) -> tuple[FaceTable, EdgeTable]:
    """Build unique face and edge tables with deterministic ordering.

    Faces are keyed by their sorted vertex triple and listed lexicographically;
    the same holds for edges and sorted pairs. Raises
    :class:`NonManifoldError` if a face has more than two incident tets.
    """
    tets = mesh.tets
    m = len(tets)

    raw_faces = np.empty((4 * m, 3), dtype=np.int64)
    for l in range(4):
        cols = [c for c in range(4) if c != l]
        raw_faces[l::4] = tets[:, cols]
    keys = np.sort(raw_faces, axis=1)
    faces, inverse = np.unique(keys, axis=0, return_inverse=True)
    inverse = inverse.reshape(m, 4, order="C") if m else inverse.reshape(0, 4)
    # raw_faces is interleaved tet-major: row 4*t + l
    tet_to_faces = np.empty((m, 4), dtype=np.int64)
    tet_face_signs = np.empty((m, 4), dtype=np.int64)
    face_to_tets = np.full((len(faces), 2), -1, dtype=np.int64)
    counts = np.zeros(len(faces), dtype=np.int64)
    for t in range(m):
        for l in range(4):
            f = inverse[t, l] if m else 0
            tet_to_faces[t, l] = f
            outward = tuple(tets[t, list(OPPOSITE_FACE[l])])
            order = tuple(np.argsort(outward))
            tet_face_signs[t, l] = _permutation_parity(order)
            if counts[f] >= 2:
                raise NonManifoldError(f"face {tuple(faces[f])} has >2 incident tets")
            face_to_tets[f, counts[f]] = t
            counts[f] += 1

    raw_edges = np.empty((6 * m, 2), dtype=np.int64)
    for e, (i, j) in enumerate(LOCAL_EDGES):
        raw_edges[e::6, 0] = tets[:, i]
        raw_edges[e::6, 1] = tets[:, j]
    ekeys = np.sort(raw_edges, axis=1)
    edges, einverse = np.unique(ekeys, axis=0, return_inverse=True)
    tet_to_edges = (einverse.reshape(m, 6) if m else einverse.reshape(0, 6)).astype(np.int64)

    for a in (faces, tet_to_faces, tet_face_signs, face_to_tets, edges, tet_to_edges):
        a.flags.writeable = False
    return (FaceTable(faces, tet_to_faces, tet_face_signs, face_to_tets),
            EdgeTable(edges, tet_to_edges))


def boundary_vertex_mask(mesh: TetMesh, faces: FaceTable) -> np.ndarray:
    """True for vertices lying on a boundary face."""
    mask = np.zeros(mesh.n_vertices, dtype=bool)
    bf = faces.faces[faces.boundary_mask()]
    if len(bf):
        mask[np.unique(bf)] = True
    return mask


def barycenter(points) -> np.ndarray:
    """Arithmetic mean of the simplex vertices."""
    return np.asarray(points, dtype=np.float64).mean(axis=0)


def circumcenter(points) -> np.ndarray:
    """Point equidistant from the 2, 3, or 4 given simplex vertices.

    Edges use the midpoint; triangles solve the 2x2 in-plane Gram system (so
    the result lies in the triangle's plane); tets solve the 3x3 equidistance
    system. Raises :class:`DegenerateError` when the system's condition
    number exceeds ``CIRCUMCENTER_COND_LIMIT``.
    """
    pts = _as_points(points)
    k = len(pts)
    if k == 2:
        if np.linalg.norm(pts[1] - pts[0]) == 0.0:
            raise DegenerateError("zero-length edge has no circumcenter")
        return 0.5 * (pts[0] + pts[1])
    if k == 3:
        u = pts[1:] - pts[0]
        gram = u @ u.T
        if np.linalg.cond(gram) > CIRCUMCENTER_COND_LIMIT:
            raise DegenerateError("triangle circumcenter system ill-conditioned")
        alpha = np.linalg.solve(gram, 0.5 * np.einsum("ij,ij->i", u, u))
        return pts[0] + alpha @ u
    if k == 4:
        e = pts[1:] - pts[0]
        a = 2.0 * e
        if np.linalg.cond(a) > CIRCUMCENTER_COND_LIMIT:
            raise DegenerateError("tet circumcenter system ill-conditioned")
        d = np.linalg.solve(a, np.einsum("ij,ij->i", e, e))
        return pts[0] + d
    raise ValueError(f"simplex must have 2, 3, or 4 vertices, got {k}")


def barycentric_coords(p, tri) -> np.ndarray:
    """Barycentric coordinates of p with respect to a triangle.

    p is first projected onto the triangle's plane; the out-of-plane distance
    must stay below 1e-9 times the triangle diameter.
    """
    pts = _as_points(tri, rows=3)
    p = np.asarray(p, dtype=np.float64)
    u = pts[1:] - pts[0]
    gram = u @ u.T
    if np.linalg.cond(gram) > CIRCUMCENTER_COND_LIMIT:
        raise DegenerateError("zero-area triangle has no barycentric coordinates")
    rhs = u @ (p - pts[0])
    b12 = np.linalg.solve(gram, rhs)
    proj = pts[0] + b12 @ u
    diameter = max(np.linalg.norm(pts[1] - pts[0]), np.linalg.norm(pts[2] - pts[0]),
                   np.linalg.norm(pts[2] - pts[1]))
    if np.linalg.norm(p - proj) > 1e-9 * diameter:
        raise ValueError("point is too far from the triangle's plane")
    return np.array([1.0 - b12[0] - b12[1], b12[0], b12[1]])


# Kuhn subdivision: six tets around the (0,0,0)-(1,1,1) cube diagonal, one per
# ordering of the unit steps.
_KUHN_ORDERS = ((0, 1, 2), (0, 2, 1), (1, 0, 2), (1, 2, 0), (2, 0, 1), (2, 1, 0))


def make_grid(nx: int, ny: int, nz: int, h: float = 1.0, diagonal: int = 0) -> TetMesh:
    """Regular grid of (nx, ny, nz) cube cells, each split into six tets.

    All six tets of a cell share the cell diagonal selected by ``diagonal``
    (0: (0,0,0)-(1,1,1), 1/2/3: the image of that diagonal under a mirror of
    the x/y/z axis), so neighbouring cells conform.
    """
    if min(nx, ny, nz) < 1:
        raise ValueError("grid dimensions must be at least 1")
    if diagonal not in (0, 1, 2, 3):
        raise ValueError("diagonal must be in 0..3")
    dims = np.array([nx, ny, nz])
    strides = np.array([1, nx + 1, (nx + 1) * (ny + 1)])

    ii, jj, kk = np.meshgrid(np.arange(nx + 1), np.arange(ny + 1), np.arange(nz + 1),
                             indexing="ij")
    lattice = np.stack([ii, jj, kk], axis=-1).reshape(-1, 3)
    order = lattice @ strides
    vertices = np.empty(((nx + 1) * (ny + 1) * (nz + 1), 3))
    vertices[order] = lattice * h

    flip = np.zeros(3, dtype=bool)
    if diagonal > 0:
        flip[diagonal - 1] = True

    def corner(cell, local):
        local = np.where(flip, 1 - local, local)
        return int((cell + local) @ strides)

    tets = []
    for cz in range(nz):
        for cy in range(ny):
            for cx in range(nx):
                cell = np.array([cx, cy, cz])
                for axes in _KUHN_ORDERS:
                    steps = np.eye(3, dtype=int)[list(axes)]
                    c0 = np.zeros(3, dtype=int)
                    c1 = steps[0]
                    c2 = steps[0] + steps[1]
                    c3 = np.ones(3, dtype=int)
                    tets.append([corner(cell, c) for c in (c0, c1, c2, c3)])
    return TetMesh(vertices, np.array(tets, dtype=np.int64))


def _splitmix64(state: np.ndarray) -> np.ndarray:
    """One SplitMix64 output per input state (uint64 arrays)."""
    z = state + np.uint64(0x9E3779B97F4A7C15)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def perturb(mesh: TetMesh, eps: float, seed: int) -> TetMesh:
    """Displace every vertex by a deterministic pseudo-random vector.

    Each displacement component is uniform in [-eps/sqrt(3), eps/sqrt(3)]
    (so the displacement norm is at most eps), generated by SplitMix64 from
    ``seed`` with one stream position per (vertex, axis) in vertex-major
    order. Byte-for-byte reproducible across platforms; labels are kept.
    Raises :class:`DegenerateError` if any tet volume becomes non-positive.
    """
    if eps < 0:
        raise ValueError("eps must be non-negative")
    n = mesh.n_vertices
    with np.errstate(over="ignore"):
        counter = np.uint64(seed) + np.arange(1, 3 * n + 1, dtype=np.uint64)
        bits = _splitmix64(counter)
    unit = (bits >> np.uint64(11)).astype(np.float64) * 2.0 ** -53  # [0, 1)
    disp = (2.0 * unit.reshape(n, 3) - 1.0) * (eps / np.sqrt(3.0))
    vertices = mesh.vertices + disp
    if mesh.n_tets:
        vols = tet_volumes(vertices, mesh.tets)
        if np.any(vols <= 0.0):
            t = int(np.argmin(vols))
            raise DegenerateError(f"perturbation collapses tet {t} (volume {vols[t]:.3e})")
    return TetMesh(vertices, mesh.tets.copy(),
                   None if mesh.vertex_labels is None else mesh.vertex_labels.copy())
