import numpy as np
import pytest

from dualvol import (CenterSet, TetMesh, assemble_center_qp, build_operators,
                     build_optimized_centers, compute_centers, derive_connectivity,
                     make_grid, optimize_face_centers, perturb,
                     postfacto_tet_centers, property_report, solve_qp,
                     verify_definite)
from dualvol.dual import (divergences_all, face_circumcenters, gradients_all,
                          hex_volumes_all)
from dualvol.fixtures import two_tet_spike
from dualvol.optim import SYMMETRY_PAIRS

from conftest import REFERENCE_TET


def _regular_tet_mesh():
    pts = np.array([(0, 0, 0), (1, 0, 0), (0.5, np.sqrt(3) / 2, 0),
                    (0.5, np.sqrt(3) / 6, np.sqrt(6) / 3)])
    return TetMesh(pts, np.array([[0, 1, 2, 3]]))


class TestAssembleCenterQp:
    def test_barycenters_always_feasible(self):
        # plug B = 1/3 everywhere: every equality row must be satisfied
        for mesh in (perturb(make_grid(2, 2, 2), 0.3, 5), two_tet_spike(0.1),
                     _regular_tet_mesh()):
            faces, edges = derive_connectivity(mesh)
            problem, maps = assemble_center_qp(mesh, faces, edges)
            b = np.full(problem.n, 1.0 / 3.0)
            resid = np.abs(problem.Aeq @ b - problem.beq).max()
            assert resid <= 1e-10
            assert np.all(b >= problem.lower)

    def test_symmetry_rows_match_numeric_differentiation(self):
        # oracle: evaluate L_t(B) through the divergence path on unit vectors
        rng = np.random.default_rng(17)
        mesh = perturb(make_grid(1, 1, 1), 0.25, 7)
        faces, edges = derive_connectivity(mesh)
        problem, maps = assemble_center_qp(mesh, faces, edges)
        k = faces.n_faces
        g = gradients_all(mesh)

        def asym_entries(bvec):
            face_centers = np.einsum("fj,fjd->fd", bvec.reshape(k, 3),
                                     mesh.vertices[faces.faces])
            centers = CenterSet(
                0.5 * (mesh.vertices[edges.edges[:, 0]]
                       + mesh.vertices[edges.edges[:, 1]]),
                face_centers, mesh.vertices[mesh.tets].mean(axis=1))
            lt = divergences_all(mesh, faces, edges, centers) @ g
            rows = []
            for t in range(mesh.n_tets):
                for p, q_ in SYMMETRY_PAIRS:
                    rows.append(lt[t, p, q_] - lt[t, q_, p])
            return np.array(rows)

        bvec = rng.uniform(0.0, 1.0, size=problem.n)
        oracle = asym_entries(bvec)
        assembled = (problem.Aeq @ bvec)[k:]
        assert np.abs(assembled - oracle).max() <= 1e-12 * max(1, np.abs(oracle).max())

    def test_objective_expands_distance(self):
        rng = np.random.default_rng(23)
        mesh = _regular_tet_mesh()
        faces, edges = derive_connectivity(mesh)
        problem, maps = assemble_center_qp(mesh, faces, edges)
        o = face_circumcenters(mesh, faces)
        bvec = rng.uniform(0.0, 1.0, size=problem.n)
        centers = np.einsum("fj,fjd->fd", bvec.reshape(-1, 3),
                            mesh.vertices[faces.faces])
        direct = np.sum((centers - o) ** 2)
        quad = 0.5 * bvec @ (problem.P @ bvec) + problem.q @ bvec + np.sum(o ** 2)
        assert quad == pytest.approx(direct, rel=1e-12)

    def test_margin_shifts_bounds(self):
        mesh = _regular_tet_mesh()
        faces, edges = derive_connectivity(mesh)
        problem, _ = assemble_center_qp(mesh, faces, edges, margin=0.05)
        assert np.all(problem.lower == 0.05)


class TestOptimizeFaceCenters:
    def test_regular_tet_recovers_circumcenters(self):
        mesh = _regular_tet_mesh()
        faces, edges = derive_connectivity(mesh)
        centers, report = optimize_face_centers(mesh, faces, edges)
        cc = face_circumcenters(mesh, faces)
        assert np.abs(centers.face_centers - cc).max() <= 1e-8
        assert report.objective <= 1e-14
        assert report.moved_face_count == 0

    def test_grid_recovers_circumcenters(self):
        mesh = make_grid(3, 3, 3)
        faces, edges = derive_connectivity(mesh)
        centers, report = optimize_face_centers(mesh, faces, edges)
        cc = face_circumcenters(mesh, faces)
        assert np.abs(centers.face_centers - cc).max() <= 1e-6
        assert report.objective <= 1e-12

    def test_symmetry_residual_bound(self):
        mesh = perturb(make_grid(2, 2, 2), 0.3, 13)
        faces, edges = derive_connectivity(mesh)
        centers, report = optimize_face_centers(mesh, faces, edges)
        assert report.max_symmetry_residual <= 1e-8
        assert report.min_face_coordinate >= -1e-10

    def test_obtuse_mesh_symmetric_where_alexa_is_not(self):
        mesh = two_tet_spike(0.12)
        faces, edges = derive_connectivity(mesh)
        opt = build_operators(mesh, "optimized", faces=faces, edges=edges)
        alexa = build_operators(mesh, "alexa", faces=faces, edges=edges)
        rep_opt = property_report(mesh, faces, opt.laplacian, opt.mass)
        rep_alexa = property_report(mesh, faces, alexa.laplacian, alexa.mass)
        assert rep_opt.symmetry_rel <= 1e-8
        assert rep_alexa.symmetry_rel > 1e-3

    def test_displacement_shrinks_with_perturbation(self):
        base = make_grid(2, 2, 2)
        faces, edges = derive_connectivity(base)
        reference = face_circumcenters(base, faces)
        displacements = []
        for eps in (1e-1, 1e-2, 1e-3, 1e-4):
            mesh = perturb(base, eps, 3)
            centers, _ = optimize_face_centers(mesh, faces, edges)
            displacements.append(np.abs(centers.face_centers - reference).max())
        assert all(a > b for a, b in zip(displacements, displacements[1:]))

    def test_variable_permutation_uniqueness(self):
        # strict convexity on the feasible subspace: permuted variables give
        # back the same centers
        mesh = perturb(make_grid(1, 1, 2), 0.28, 19)
        faces, edges = derive_connectivity(mesh)
        problem, maps = assemble_center_qp(mesh, faces, edges)
        sol = solve_qp(problem)
        rng = np.random.default_rng(100)
        perm = rng.permutation(problem.n)
        import scipy.sparse as sp
        pmat = sp.csr_matrix((np.ones(problem.n), (np.arange(problem.n), perm)),
                             shape=(problem.n, problem.n))
        permuted = type(problem)(
            P=pmat @ problem.P @ pmat.T, q=pmat @ problem.q,
            Aeq=problem.Aeq @ pmat.T, beq=problem.beq,
            lower=pmat @ problem.lower, upper=np.full(problem.n, np.inf))
        sol2 = solve_qp(permuted)
        assert np.abs((pmat.T @ sol2.x) - sol.x).max() <= 1e-8

    def test_local_optimality_spot_check(self):
        # nudging any face center towards its circumcenter and re-projecting
        # onto the constraints never decreases the objective
        import scipy.sparse as sp
        mesh = two_tet_spike(0.12)
        faces, edges = derive_connectivity(mesh)
        problem, maps = assemble_center_qp(mesh, faces, edges)
        sol = solve_qp(problem)
        o = face_circumcenters(mesh, faces)
        vv = mesh.vertices[faces.faces]

        def objective(bvec):
            centers = np.einsum("fj,fjd->fd", bvec.reshape(-1, 3), vv)
            return float(np.sum((centers - o) ** 2))

        base = objective(sol.x)
        rng = np.random.default_rng(0)
        from dualvol.dual import face_point_barycentrics
        b_circ = face_point_barycentrics(mesh, faces, o).ravel()
        for f in rng.choice(faces.n_faces, size=3, replace=False):
            nudged = sol.x.copy()
            sl = slice(3 * f, 3 * f + 3)
            nudged[sl] += 1e-3 * (b_circ[sl] - nudged[sl])
            proj = solve_qp(type(problem)(
                P=sp.identity(problem.n, format='csr') * 2.0, q=-2.0 * nudged,
                Aeq=problem.Aeq, beq=problem.beq,
                lower=problem.lower, upper=problem.upper))
            assert objective(proj.x) >= base - 1e-9


class TestPostfactoTetCenters:
    def test_acute_keeps_circumcenter(self):
        mesh = _regular_tet_mesh()
        faces, edges = derive_connectivity(mesh)
        centers = compute_centers(mesh, faces, edges, "circumcentric")
        tc, fallbacks = postfacto_tet_centers(mesh, faces, edges, centers)
        from dualvol.dual import tet_circumcenters
        assert fallbacks == 0
        assert np.abs(tc - tet_circumcenters(mesh)).max() <= 1e-12

    def test_reference_tet_projects_to_boundary(self):
        mesh = TetMesh(REFERENCE_TET.copy(), np.array([[0, 1, 2, 3]]))
        faces, edges = derive_connectivity(mesh)
        centers = compute_centers(mesh, faces, edges, "barycentric")
        tc, fallbacks = postfacto_tet_centers(mesh, faces, edges, centers)
        # closest-point-on-simplex oracle: projecting (.5,.5,.5) onto
        # {x,y,z >= 0, x+y+z <= 1} gives (1/3,1/3,1/3)
        assert fallbacks == 0
        assert np.abs(tc[0] - 1.0 / 3.0).max() <= 1e-10

    def test_chunk_volumes_nonnegative(self):
        mesh = perturb(make_grid(2, 2, 2), 0.3, 31)
        faces, edges = derive_connectivity(mesh)
        centers, _ = optimize_face_centers(mesh, faces, edges)
        tc, fallbacks = postfacto_tet_centers(mesh, faces, edges, centers)
        final = centers.replace_tet_centers(tc)
        vols = hex_volumes_all(mesh, faces, edges, final)
        assert fallbacks == 0
        assert vols.min() >= -1e-12

    def test_infeasible_falls_back_to_barycenter(self):
        # adversarial face centers far outside make the chunk constraints empty
        mesh = TetMesh(REFERENCE_TET.copy(), np.array([[0, 1, 2, 3]]))
        faces, edges = derive_connectivity(mesh)
        base = compute_centers(mesh, faces, edges, "barycentric")
        rng = np.random.default_rng(5)
        crazy = CenterSet(base.edge_centers.copy(),
                          base.face_centers + rng.normal(scale=50.0, size=(4, 3)),
                          base.tet_centers.copy())
        tc, fallbacks = postfacto_tet_centers(mesh, faces, edges, crazy)
        if fallbacks:  # fallback flagged and center is the barycenter
            assert np.allclose(tc[0], REFERENCE_TET.mean(axis=0))
        else:  # or the projection genuinely satisfied every constraint
            vols = hex_volumes_all(mesh, faces, edges, crazy.replace_tet_centers(tc))
            assert vols.min() >= -1e-9


class TestVerifyDefinite:
    def test_barycentric_passes_with_volume_eigenvalues(self):
        mesh = perturb(make_grid(2, 2, 2), 0.2, 41)
        faces, edges = derive_connectivity(mesh)
        centers = compute_centers(mesh, faces, edges, "barycentric")
        report = verify_definite(mesh, faces, edges, centers)
        assert report.passed
        assert report.lambda_max == pytest.approx(mesh.volumes().max(), rel=1e-10)

    def test_optimized_passes_everywhere(self):
        for mesh in (two_tet_spike(0.12), perturb(make_grid(2, 2, 2), 0.3, 43)):
            faces, edges = derive_connectivity(mesh)
            centers, _ = build_optimized_centers(mesh, faces, edges)
            assert verify_definite(mesh, faces, edges, centers).passed

    def test_circumcentric_sliver_fails(self):
        mesh = two_tet_spike(0.05)
        faces, edges = derive_connectivity(mesh)
        centers = compute_centers(mesh, faces, edges, "circumcentric")
        report = verify_definite(mesh, faces, edges, centers)
        assert not report.passed
        assert report.worst_tet in (0, 1)


class TestOptimizedGuarantees:
    def test_mass_positive_and_energy_psd(self):
        mesh = two_tet_spike(0.12)
        out = build_operators(mesh, "optimized")
        rep = property_report(mesh, out.faces, out.laplacian, out.mass)
        assert rep.mass_min > 0
        assert rep.symmetry_rel <= 1e-8
        assert rep.lambda_min >= -1e-8 * rep.lambda_max
        assert rep.kernel_dim == 1
        assert rep.mass_sum == pytest.approx(mesh.total_volume(), rel=1e-10)

    def test_acute_fixed_point(self):
        # circumcentric centers already satisfy every constraint -> identical
        mesh = _regular_tet_mesh()
        faces, edges = derive_connectivity(mesh)
        circ = compute_centers(mesh, faces, edges, "circumcentric")
        opt, _ = build_optimized_centers(mesh, faces, edges)
        assert np.abs(opt.face_centers - circ.face_centers).max() <= 1e-8
