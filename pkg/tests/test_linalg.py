import io

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dualvol import (NotSpdError, ParseError, PositivityError, assemble,
                     build_operators, eigensolve_generalized, eigensolve_sym,
                     make_grid, read_matrixmarket, read_vector_csv, solve_spd,
                     write_matrixmarket, write_vector_csv)


class TestAssemble:
    def test_duplicates_summed(self):
        mat = assemble([(0, 0, 1.0), (0, 0, 2.0)], 2)
        assert mat[0, 0] == 3.0
        assert mat.nnz == 1

    def test_empty(self):
        mat = assemble([], 3)
        assert mat.shape == (3, 3)
        assert mat.nnz == 0

    def test_out_of_range(self):
        with pytest.raises(IndexError):
            assemble([(0, 5, 1.0)], 3)

    @given(st.integers(0, 10_000))
    def test_matches_dense_accumulation(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 8))
        count = int(rng.integers(0, 40))
        rows = rng.integers(0, n, count)
        cols = rng.integers(0, n, count)
        vals = rng.normal(size=count)
        dense = np.zeros((n, n))
        for i, j, v in zip(rows, cols, vals):
            dense[i, j] += v
        mat = assemble((rows, cols, vals), n)
        assert np.abs(mat.toarray() - dense).max() <= 1e-14 * max(1, np.abs(dense).max())


class TestMatrixMarket:
    def test_single_entry(self):
        text = write_matrixmarket(assemble([(0, 0, 42.0)], 1))
        lines = text.splitlines()
        assert lines[0] == "%%MatrixMarket matrix coordinate real general"
        assert lines[1] == "1 1 1"
        assert lines[2].startswith("1 1 4.2")
        assert float(lines[2].split()[2]) == 42.0

    def test_reject_complex(self):
        with pytest.raises(ParseError):
            read_matrixmarket("%%MatrixMarket matrix coordinate complex general\n1 1 0\n")

    def test_reject_bad_header(self):
        with pytest.raises(ParseError):
            read_matrixmarket("%%NotMatrixMarket whatever\n")

    @given(st.integers(0, 10_000))
    def test_roundtrip(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 10))
        mat = assemble((rng.integers(0, n, 20), rng.integers(0, n, 20),
                        rng.normal(size=20) * 10.0 ** rng.integers(-8, 8)), n)
        again = read_matrixmarket(io.StringIO(write_matrixmarket(mat)))
        assert (mat != again).nnz == 0  # bit-identical

    def test_file_io(self, tmp_path):
        mat = assemble([(0, 1, 0.1), (1, 0, -3.5)], 2)
        path = tmp_path / "m.mtx"
        write_matrixmarket(mat, str(path))
        assert (read_matrixmarket(str(path)) != mat).nnz == 0


class TestEigensolveSym:
    def test_diagonal(self):
        res = eigensolve_sym(np.diag([2.0, 3.0]))
        assert np.allclose(res.eigenvalues, [2.0, 3.0])

    def test_path_graph(self):
        # characteristic polynomial roots by hand: 0, 1, 3
        lap = np.array([[1.0, -1.0, 0.0], [-1.0, 2.0, -1.0], [0.0, -1.0, 1.0]])
        res = eigensolve_sym(lap)
        assert np.allclose(res.eigenvalues, [0.0, 1.0, 3.0], atol=1e-12)
        gram = res.eigenvectors.T @ res.eigenvectors
        assert np.abs(gram - np.eye(3)).max() <= 1e-10

    def test_barycentric_grid_psd(self):
        out = build_operators(make_grid(2, 2, 2), "barycentric")
        neg = -(out.laplacian + out.laplacian.T).toarray()
        w = eigensolve_sym(neg).eigenvalues
        assert w[0] >= -1e-10 * w[-1]

    def test_residual_bound(self):
        rng = np.random.default_rng(0)
        a = rng.normal(size=(30, 30))
        a = a + a.T
        res = eigensolve_sym(a)
        assert res.residual_norms.max() <= 1e-9 * np.linalg.norm(a, "fro")

    def test_permutation(self):
        rng = np.random.default_rng(1)
        a = rng.normal(size=(12, 12))
        a = a + a.T
        perm = rng.permutation(12)
        w1 = eigensolve_sym(a).eigenvalues
        w2 = eigensolve_sym(a[np.ix_(perm, perm)]).eigenvalues
        assert np.allclose(w1, w2, atol=1e-10 * np.abs(w1).max())


class TestEigensolveGeneralized:
    def test_two_node(self):
        a = np.array([[-1.0, 1.0], [1.0, -1.0]])
        res = eigensolve_generalized(a, np.ones(2), 2)
        assert np.allclose(sorted(res.eigenvalues), [-2.0, 0.0], atol=1e-12)
        constant = res.eigenvectors[:, np.argmin(np.abs(res.eigenvalues))]
        assert np.allclose(constant[0], constant[1])

    def test_mass_scaling(self):
        a = np.array([[-1.0, 1.0], [1.0, -1.0]])
        res = eigensolve_generalized(a, 2.0 * np.ones(2), 2)
        assert np.allclose(sorted(res.eigenvalues), [-1.0, 0.0], atol=1e-12)

    def test_nonpositive_mass_raises(self):
        with pytest.raises(PositivityError):
            eigensolve_generalized(np.eye(2), np.array([1.0, -0.5]), 1)

    def test_m_orthonormal(self):
        rng = np.random.default_rng(3)
        a = rng.normal(size=(9, 9))
        a = a + a.T
        m = rng.uniform(0.5, 2.0, size=9)
        res = eigensolve_generalized(a, m, 4)
        gram = res.eigenvectors.T @ (m[:, None] * res.eigenvectors)
        assert np.abs(gram - np.eye(4)).max() <= 1e-10

    def test_simultaneous_rescaling_invariant(self):
        rng = np.random.default_rng(4)
        a = rng.normal(size=(7, 7))
        a = a + a.T
        m = rng.uniform(0.5, 2.0, size=7)
        w1 = eigensolve_generalized(a, m, 3).eigenvalues
        w2 = eigensolve_generalized(3.7 * a, 3.7 * m, 3).eigenvalues
        assert np.allclose(w1, w2, atol=1e-10 * max(1, np.abs(w1).max()))


def _bar_mesh(strategy):
    mesh = make_grid(4, 1, 1)
    out = build_operators(mesh, strategy)
    neg = -(out.laplacian + out.laplacian.T)
    fixed = {}
    for i, p in enumerate(mesh.vertices):
        if p[0] == 0.0:
            fixed[i] = 0.0
        elif p[0] == 4.0:
            fixed[i] = 1.0
    return mesh, neg, fixed


class TestSolveSpd:
    @pytest.mark.parametrize("strategy", ["barycentric", "circumcentric", "optimized"])
    def test_bar_is_linear(self, strategy):
        mesh, neg, fixed = _bar_mesh(strategy)
        x = solve_spd(neg, np.zeros(mesh.n_vertices), fixed)
        assert np.abs(x - mesh.vertices[:, 0] / 4.0).max() <= 1e-8

    def test_dense_oracle(self):
        rng = np.random.default_rng(5)
        base = rng.normal(size=(20, 20))
        spd = base @ base.T + 20 * np.eye(20)
        b = rng.normal(size=20)
        x = solve_spd(spd, b)
        assert np.abs(x - np.linalg.solve(spd, b)).max() <= 1e-9 * np.abs(b).max()

    def test_not_spd_raises(self):
        indefinite = np.diag([1.0, -1.0])
        with pytest.raises(NotSpdError):
            solve_spd(indefinite, np.ones(2))

    def test_fixed_values_exact(self):
        mesh, neg, fixed = _bar_mesh("barycentric")
        x = solve_spd(neg, np.zeros(mesh.n_vertices), fixed)
        for i, v in fixed.items():
            assert x[i] == v


class TestVectorCsv:
    def test_roundtrip(self):
        v = np.array([1.0, -2.5e-17, 3.141592653589793, 0.0])
        assert np.array_equal(read_vector_csv(io.StringIO(write_vector_csv(v))), v)

    def test_file_io(self, tmp_path):
        v = np.linspace(-1, 1, 7)
        path = tmp_path / "v.csv"
        write_vector_csv(v, str(path))
        assert np.array_equal(read_vector_csv(str(path)), v)

    def test_bad_entry(self):
        with pytest.raises(ParseError):
            read_vector_csv(io.StringIO("1.0\nnope\n"))
