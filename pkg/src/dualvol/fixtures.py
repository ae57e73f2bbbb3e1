"""Deterministic sample meshes: non-Delaunay stress fixtures and labeled
spherical shells.

The stress fixtures are small constructed meshes (slivers, squashed and
jittered grids, spike configurations) on which circumcentric and snapped
dual volumes misbehave: negative mass entries, asymmetric Laplacians,
indefinite energies. They are the workhorses of the verification suite and
of the bundled sample-mesh directory.

Shell meshes fill the gap between concentric spheres of radii 0.5 and 1.0
with an icosphere-prism construction; vertex labels mark the inner (1),
outer (2), and middle r=0.75 (3) spheres for Dirichlet experiments.
"""

from __future__ import annotations

import numpy as np

from .mesh import TetMesh, make_grid, perturb

INNER_LABEL = 1
OUTER_LABEL = 2
MIDDLE_LABEL = 3


# ---------------------------------------------------------------------------
# icosphere + prism shells
# ---------------------------------------------------------------------------

def icosphere(subdivisions: int) -> tuple[np.ndarray, np.ndarray]:
    """Unit icosphere (vertices, triangles) with deterministic ordering."""
    phi = (1.0 + np.sqrt(5.0)) / 2.0
    verts = np.array([
        (-1, phi, 0), (1, phi, 0), (-1, -phi, 0), (1, -phi, 0),
        (0, -1, phi), (0, 1, phi), (0, -1, -phi), (0, 1, -phi),
        (phi, 0, -1), (phi, 0, 1), (-phi, 0, -1), (-phi, 0, 1),
    ], dtype=np.float64)
    verts /= np.linalg.norm(verts, axis=1)[:, None]
    tris = [
        (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
        (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
        (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
        (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
    ]
    verts = [v for v in verts]
    for _ in range(subdivisions):
        cache: dict[tuple[int, int], int] = {}

        def midpoint(i: int, j: int) -> int:
            key = (min(i, j), max(i, j))
            if key not in cache:
                p = verts[i] + verts[j]
                verts.append(p / np.linalg.norm(p))
                cache[key] = len(verts) - 1
            return cache[key]

        new_tris = []
        for i, j, k in tris:
            ij, jk, ki = midpoint(i, j), midpoint(j, k), midpoint(k, i)
            new_tris += [(i, ij, ki), (j, jk, ij), (k, ki, jk), (ij, jk, ki)]
        tris = new_tris
    return np.array(verts), np.array(tris, dtype=np.int64)


def _split_prism(a, b) -> list[tuple[int, int, int, int]]:
    """Split prism (bottom a0a1a2, top b0b1b2) into three tets.

    Each quad face is cut along the diagonal through its smallest global
    vertex index, so neighbouring prisms agree on shared quads.
    """
    a = list(a)
    b = list(b)
    smallest = int(np.argmin(a + b))
    if smallest >= 3:
        a, b = b, a
        smallest -= 3
    a = a[smallest:] + a[:smallest]
    b = b[smallest:] + b[:smallest]
    # quads at a0 are cut through a0; the far quad (a1,a2,b2,b1) through its min
    if min(a[1], b[2]) < min(a[2], b[1]):
        return [(a[0], b[0], b[1], b[2]), (a[0], a[1], a[2], b[2]),
                (a[0], a[1], b[2], b[1])]
    return [(a[0], b[0], b[1], b[2]), (a[0], a[1], a[2], b[1]),
            (a[0], a[2], b[2], b[1])]


def shell_mesh(level: int = 1, r_inner: float = 0.5, r_outer: float = 1.0,
               r_middle: float = 0.75, grade: float = 1.35) -> TetMesh:
    """Tet mesh between concentric spheres with labeled shells.

    ``level`` scales both the angular (icosphere subdivisions = level) and
    radial resolution; the middle radius is always one of the layers. The
    radial spacing follows a power law (``grade``), which mixes prism aspect
    ratios so that only part of the faces are obtuse.
    """
    if level < 1:
        raise ValueError("level must be >= 1")
    sphere_v, sphere_f = icosphere(level)
    n_layers = 2 ** level * 2  # layers of prisms; radii include r_middle
    radii = r_inner + (r_outer - r_inner) * np.linspace(0.0, 1.0, n_layers + 1) ** grade
    middle_layer = int(np.argmin(np.abs(radii - r_middle)))
    radii[middle_layer] = r_middle
    nv = len(sphere_v)

    vertices = np.concatenate([r * sphere_v for r in radii])
    labels = np.zeros(len(vertices), dtype=np.int64)
    labels[:nv] = INNER_LABEL
    labels[middle_layer * nv:(middle_layer + 1) * nv] = MIDDLE_LABEL
    labels[-nv:] = OUTER_LABEL

    tets: list[tuple[int, int, int, int]] = []
    for layer in range(n_layers):
        lo = layer * nv
        hi = (layer + 1) * nv
        for tri in sphere_f:
            bottom = [lo + int(t) for t in tri]
            top = [hi + int(t) for t in tri]
            tets.extend(_split_prism(bottom, top))
    return TetMesh(vertices, np.array(tets, dtype=np.int64), labels)


# ---------------------------------------------------------------------------
# non-Delaunay stress fixtures
# ---------------------------------------------------------------------------

def two_tet_spike(dz: float = 0.12) -> TetMesh:
    """Two tets glued along an obtuse face with flat apexes.

    For small ``dz`` both tet circumspheres are huge and the circumcentric
    dual volume of the apexes is negative; every face is obtuse.
    """
    vertices = np.array([
        (0.0, 0.0, 0.0), (1.0, 0.0, 0.0), (0.0, 1.0, 0.0),
        (0.3, 0.3, dz), (0.3, 0.3, -dz),
    ])
    tets = np.array([(0, 1, 2, 3), (0, 2, 1, 4)])
    return TetMesh(vertices, tets)


def _scaled_jittered_grid(nx, ny, nz, scale, eps, seed) -> TetMesh:
    grid = make_grid(nx, ny, nz, 1.0, 0)
    mesh = TetMesh(grid.vertices * np.asarray(scale, dtype=np.float64),
                   grid.tets.copy())
    return perturb(mesh, eps, seed) if eps else mesh


def spike_grid(pull: float = 1.4) -> TetMesh:
    """2x2x2 grid whose center vertex is pulled far towards a corner."""
    grid = make_grid(2, 2, 2, 1.0, 0)
    vertices = grid.vertices.copy()
    center = int(np.argmin(np.linalg.norm(vertices - 1.0, axis=1)))
    vertices[center] += pull * np.array([0.31, 0.24, 0.27])
    return TetMesh(vertices, grid.tets.copy())


def edge_fan(n_spokes: int = 9, flatness: float = 0.6, radius: float = 2.2,
             pole_half: float = 0.18, radial_wobble: float = 0.5) -> TetMesh:
    """Sliver tets fanned around a short common edge; many obtuse faces."""
    vertices = [(0.0, 0.0, -pole_half), (0.0, 0.0, pole_half)]
    angles = 2.0 * np.pi * np.arange(n_spokes) / n_spokes
    for theta in angles:
        r = radius * (1.0 + radial_wobble * np.sin(2.0 * theta + 0.7))
        vertices.append((r * np.cos(theta), r * np.sin(theta),
                         flatness * np.sin(3.0 * theta)))
    tets = [(0, 1, 2 + s, 2 + (s + 1) % n_spokes) for s in range(n_spokes)]
    return TetMesh(np.array(vertices), np.array(tets, dtype=np.int64))


_FIXTURE_BUILDERS = {
    "two_tet_spike": lambda: two_tet_spike(0.12),
    "two_tet_needle": lambda: two_tet_spike(0.035),
    "squashed_slab": lambda: _scaled_jittered_grid(4, 4, 2, (1.0, 1.0, 0.24), 0.07, 3),
    "squashed_sheet": lambda: _scaled_jittered_grid(5, 5, 1, (1.0, 1.0, 0.15), 0.04, 5),
    "needle_column": lambda: _scaled_jittered_grid(3, 3, 3, (1.0, 1.0, 4.0), 0.22, 11),
    "jittered_box": lambda: _scaled_jittered_grid(4, 4, 4, (1.0, 1.0, 1.0), 0.34, 13),
    "jittered_box2": lambda: _scaled_jittered_grid(3, 4, 5, (1.0, 1.0, 1.0), 0.30, 17),
    "flat_brick": lambda: _scaled_jittered_grid(6, 6, 2, (1.0, 1.0, 0.35), 0.10, 19),
    "spike_grid": spike_grid,
    "edge_fan": edge_fan,
    "anisotropic_box": lambda: _scaled_jittered_grid(4, 3, 3, (2.2, 1.0, 0.45), 0.16, 23),
    "shell_squashed": lambda: TetMesh(
        shell_mesh(1).vertices * np.array([1.0, 1.0, 0.42]),
        shell_mesh(1).tets.copy()),
}


def fixture_names() -> tuple[str, ...]:
    """Names of the bundled non-Delaunay stress fixtures."""
    return tuple(_FIXTURE_BUILDERS)


def fixture_mesh(name: str) -> TetMesh:
    """Build one stress fixture by name."""
    try:
        builder = _FIXTURE_BUILDERS[name]
    except KeyError:
        raise KeyError(f"unknown fixture {name!r}; see fixture_names()") from None
    return builder()
