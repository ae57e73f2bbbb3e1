"""Sparse assembly, dense (generalized) eigensolvers, SPD solves, matrix I/O.

Sparse matrices are ``scipy.sparse.csr_matrix`` in canonical form (sorted
column indices, duplicates summed); :func:`assemble` is the single
constructor used by the operator builders so the layout is deterministic.
Spectral routines are dense and intended for desk-scale problems
(n <= ``DENSE_LIMIT``).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse

from .errors import ConvergenceError, NotSpdError, ParseError, PositivityError

DENSE_LIMIT = 4000

SparseMatrix = scipy.sparse.csr_matrix


def assemble(triplets, n_rows: int, n_cols: int | None = None) -> SparseMatrix:
    """Sum (row, col, value) triplets into a canonical CSR matrix.

    ``triplets`` is an iterable of (i, j, v) or a tuple of three arrays.
    Duplicate entries are summed in input order; the result is sorted and
    deduplicated, hence deterministic for a given triplet sequence.
    """
    if n_cols is None:
        n_cols = n_rows
    if isinstance(triplets, tuple) and len(triplets) == 3:
        rows, cols, vals = (np.asarray(a) for a in triplets)
    else:
        trip = list(triplets)
        if trip:
            rows, cols, vals = (np.asarray(a) for a in zip(*trip))
        else:
            rows = cols = np.empty(0, dtype=np.int64)
            vals = np.empty(0)
    rows = rows.astype(np.int64, copy=False)
    cols = cols.astype(np.int64, copy=False)
    if rows.size and (rows.min() < 0 or rows.max() >= n_rows
                      or cols.min() < 0 or cols.max() >= n_cols):
        raise IndexError("triplet index out of range")
    mat = scipy.sparse.coo_matrix((vals.astype(np.float64, copy=False), (rows, cols)),
                                  shape=(n_rows, n_cols)).tocsr()
    mat.sum_duplicates()
    mat.sort_indices()
    return mat


def write_matrixmarket(matrix, stream=None) -> str | None:
    """Write a real matrix in MatrixMarket coordinate format (1-based).

    Values are printed with 17 significant digits, which round-trips float64
    bit-identically.
    """
    mat = scipy.sparse.coo_matrix(matrix)
    lines = ["%%MatrixMarket matrix coordinate real general\n",
             f"{mat.shape[0]} {mat.shape[1]} {mat.nnz}\n"]
    order = np.lexsort((mat.col, mat.row))
    for k in order:
        lines.append(f"{mat.row[k] + 1} {mat.col[k] + 1} {mat.data[k]:.16e}\n")
    text = "".join(lines)
    if stream is None:
        return text
    if hasattr(stream, "write"):
        stream.write(text)
    else:
        with open(stream, "w", encoding="ascii") as fh:
            fh.write(text)
    return None


def read_matrixmarket(stream) -> SparseMatrix:
    """Parse a MatrixMarket coordinate real matrix (general symmetry only)."""
    if hasattr(stream, "read"):
        text = stream.read()
    else:
        text = str(stream)
        if "\n" not in text:
            with open(text, "r", encoding="ascii") as fh:
                text = fh.read()
    lines = text.splitlines()
    if not lines:
        raise ParseError("empty MatrixMarket stream")
    header = lines[0].split()
    if (len(header) != 5 or header[0] != "%%MatrixMarket" or header[1] != "matrix"
            or header[2] != "coordinate"):
        raise ParseError(f"bad MatrixMarket header: {lines[0]!r}")
    if header[3] != "real":
        raise ParseError(f"unsupported field {header[3]!r} (only 'real')")
    if header[4] != "general":
        raise ParseError(f"unsupported symmetry {header[4]!r} (only 'general')")
    body = [ln for ln in lines[1:] if ln.strip() and not ln.lstrip().startswith("%")]
    if not body:
        raise ParseError("missing size line")
    try:
        n_rows, n_cols, nnz = (int(x) for x in body[0].split())
    except ValueError:
        raise ParseError(f"bad size line: {body[0]!r}") from None
    if len(body) - 1 != nnz:
        raise ParseError(f"expected {nnz} entries, found {len(body) - 1}")
    rows = np.empty(nnz, dtype=np.int64)
    cols = np.empty(nnz, dtype=np.int64)
    vals = np.empty(nnz)
    for k, ln in enumerate(body[1:]):
        parts = ln.split()
        if len(parts) != 3:
            raise ParseError(f"bad entry line: {ln!r}")
        rows[k] = int(parts[0]) - 1
        cols[k] = int(parts[1]) - 1
        vals[k] = float(parts[2])
    if nnz and (rows.min() < 0 or rows.max() >= n_rows or cols.min() < 0
                or cols.max() >= n_cols):
        raise ParseError("entry index out of range")
    return assemble((rows, cols, vals), n_rows, n_cols)


def write_vector_csv(vector, stream=None) -> str | None:
    """Write a vector as a single-column CSV (17 significant digits)."""
    values = np.asarray(vector, dtype=np.float64).ravel()
    text = "".join(f"{v:.16e}\r\n" for v in values)
    if stream is None:
        return text
    if hasattr(stream, "write"):
        stream.write(text)
    else:
        with open(stream, "w", encoding="ascii", newline="") as fh:
            fh.write(text)
    return None


def read_vector_csv(stream) -> np.ndarray:
    """Parse a single-column CSV of reals."""
    if hasattr(stream, "read"):
        text = stream.read()
    else:
        text = str(stream)
        if "\n" not in text and "\r" not in text:
            with open(text, "r", encoding="ascii") as fh:
                text = fh.read()
    out = []
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        try:
            out.append(float(line))
        except ValueError:
            raise ParseError(f"bad vector entry {line!r}") from None
    return np.array(out)


@dataclass
class EigenResult:
    """Eigenpairs in ascending eigenvalue order, vectors as columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    residual_norms: np.ndarray


def _to_dense(a) -> np.ndarray:
    if scipy.sparse.issparse(a):
        return a.toarray()
    return np.asarray(a, dtype=np.float64)


def eigensolve_sym(a, tol: float = 1e-9) -> EigenResult:
    """Full spectrum of a symmetric dense matrix (symmetrized internally)."""
    mat = _to_dense(a)
    n = mat.shape[0]
    if n > DENSE_LIMIT:
        raise ValueError(f"dense eigensolve capped at n <= {DENSE_LIMIT}, got {n}")
    sym = 0.5 * (mat + mat.T)
    try:
        w, v = np.linalg.eigh(sym)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError(f"dense eigensolve failed: {exc}") from exc
    res = np.linalg.norm(sym @ v - v * w[None, :], axis=0)
    scale = np.linalg.norm(sym, "fro")
    if n and res.max() > tol * max(scale, 1e-300):
        raise ConvergenceError(f"eigenpair residual {res.max():.3e} exceeds {tol:.1e}*|A|")
    return EigenResult(w, v, res)


def eigensolve_generalized(a, m_diag, count: int) -> EigenResult:
    """Smallest-|lambda| eigenpairs of A v = lambda M v with diagonal M > 0.

    Solved by the symmetric scaling M^{-1/2} A M^{-1/2}; returned vectors are
    M-orthonormal and eigenvalues ascending. Raises :class:`PositivityError`
    if any diagonal mass entry is non-positive.
    """
    mat = _to_dense(a)
    diag = np.asarray(m_diag, dtype=np.float64).ravel()
    n = mat.shape[0]
    if diag.shape != (n,):
        raise ValueError("mass diagonal length mismatch")
    if n > DENSE_LIMIT:
        raise ValueError(f"dense eigensolve capped at n <= {DENSE_LIMIT}, got {n}")
    if np.any(diag <= 0.0):
        bad = int(np.argmin(diag))
        raise PositivityError(
            f"mass entry {bad} is {diag[bad]:.3e} <= 0; generalized solve undefined")
    s = 1.0 / np.sqrt(diag)
    scaled = s[:, None] * (0.5 * (mat + mat.T)) * s[None, :]
    scaled = 0.5 * (scaled + scaled.T)
    try:
        w, q = np.linalg.eigh(scaled)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError(f"dense eigensolve failed: {exc}") from exc
    order = np.argsort(np.abs(w), kind="stable")[:count]
    w = w[order]
    x = s[:, None] * q[:, order]
    value_order = np.argsort(w, kind="stable")
    w = w[value_order]
    x = x[:, value_order]
    res = np.linalg.norm(0.5 * (mat + mat.T) @ x - (diag[:, None] * x) * w[None, :], axis=0)
    return EigenResult(w, x, res)


def solve_spd(a, b, fixed: dict[int, float] | None = None) -> np.ndarray:
    """Solve A x = b for symmetric positive definite A with Dirichlet values.

    ``fixed`` maps vertex indices to prescribed values; those entries are
    eliminated and returned exactly. Uses a dense Cholesky factorization
    (desk scale) plus one step of iterative refinement; raises
    :class:`NotSpdError` when the reduced matrix is not positive definite.
    """
    mat = _to_dense(a)
    n = mat.shape[0]
    if n > 2 * DENSE_LIMIT:
        raise ValueError(f"solve_spd capped at n <= {2 * DENSE_LIMIT}, got {n}")
    b = np.asarray(b, dtype=np.float64).ravel()
    fixed = fixed or {}
    fixed_idx = np.array(sorted(fixed), dtype=np.int64)
    fixed_val = np.array([fixed[i] for i in fixed_idx], dtype=np.float64)
    mask = np.ones(n, dtype=bool)
    mask[fixed_idx] = False
    free = np.flatnonzero(mask)

    x = np.zeros(n)
    x[fixed_idx] = fixed_val
    if len(free) == 0:
        return x
    a_red = mat[np.ix_(free, free)]
    a_red = 0.5 * (a_red + a_red.T)
    b_red = b[free] - mat[np.ix_(free, fixed_idx)] @ fixed_val
    try:
        chol = scipy.linalg.cho_factor(a_red, lower=True, check_finite=False)
    except scipy.linalg.LinAlgError as exc:
        raise NotSpdError(f"reduced system is not positive definite: {exc}") from exc
    x_red = scipy.linalg.cho_solve(chol, b_red, check_finite=False)
    x_red += scipy.linalg.cho_solve(chol, b_red - a_red @ x_red, check_finite=False)
    resid = np.linalg.norm(a_red @ x_red - b_red)
    if resid > 1e-9 * max(np.linalg.norm(b_red), 1e-300):
        raise NotSpdError(f"solve residual {resid:.3e} exceeds contract")
    x[free] = x_red
    return x
