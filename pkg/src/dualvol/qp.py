"""Self-contained convex QP solver: operator splitting with an exact polish.

Solves ``min 0.5 x'Px + q'x  s.t.  Aeq x = beq, lower <= x <= upper`` for
sparse positive semi-definite P that is strictly convex on the feasible
subspace. The driver is ADMM over the stacked constraint ``[Aeq; I]`` with a
cached sparse Cholesky factorization; once the iterate is moderately
accurate the active bounds are frozen and the equality-constrained problem
is solved to machine precision by a few augmented-Lagrangian steps
("polish"), each reusing one positive definite factorization. Redundant
equality rows are harmless in this formulation.

Factorizations use CHOLMOD (via cvxopt) when available, falling back to
SuperLU; both paths are deterministic for fixed inputs and parameters.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from itertools import combinations

import numpy as np
import scipy.sparse
import scipy.sparse.linalg

try:
    import cvxopt
    import cvxopt.cholmod
    _HAVE_CHOLMOD = True
except ImportError:  # pragma: no cover - cvxopt is a declared dependency
    _HAVE_CHOLMOD = False

logger = logging.getLogger(__name__)


class _SpdFactor:
    """Sparse SPD factorization: CHOLMOD supernodal with SuperLU fallback."""

    def __init__(self, mat: scipy.sparse.csc_matrix):
        self._n = mat.shape[0]
        self._chol = None
        self._lu = None
        if _HAVE_CHOLMOD and self._n:
            coo = mat.tocoo()
            cvx = cvxopt.spmatrix(coo.data, coo.row.astype(np.int64),
                                  coo.col.astype(np.int64), size=coo.shape)
            try:
                factor = cvxopt.cholmod.symbolic(cvx)
                cvxopt.cholmod.numeric(cvx, factor)
                self._chol = factor
                return
            except ArithmeticError:
                pass
        self._lu = scipy.sparse.linalg.splu(
            mat, permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
            options=dict(SymmetricMode=True))

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        if self._chol is not None:
            buf = cvxopt.matrix(np.asarray(rhs, dtype=np.float64))
            cvxopt.cholmod.solve(self._chol, buf)
            return np.asarray(buf).ravel()
        return self._lu.solve(np.asarray(rhs, dtype=np.float64))


OPTIMAL = "optimal"
MAX_ITERATIONS = "max_iterations"
INFEASIBLE = "infeasible"


@dataclass
class QpProblem:
    """Data of one box-and-equality constrained QP (see module docstring)."""

    P: scipy.sparse.csr_matrix
    q: np.ndarray
    Aeq: scipy.sparse.csr_matrix
    beq: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        self.P = scipy.sparse.csr_matrix(self.P)
        self.q = np.asarray(self.q, dtype=np.float64).ravel()
        n = len(self.q)
        if self.P.shape != (n, n):
            raise ValueError("P must be n x n")
        asym = self.P - self.P.T
        if asym.nnz and np.abs(asym.data).max() > 1e-10 * (
                1.0 + np.abs(self.P.data).max(initial=0.0)):
            raise ValueError("P must be symmetric")
        if self.Aeq is None:
            self.Aeq = scipy.sparse.csr_matrix((0, n))
        self.Aeq = scipy.sparse.csr_matrix(self.Aeq)
        if self.Aeq.shape[1] != n:
            raise ValueError("Aeq must have n columns")
        self.beq = np.asarray(self.beq, dtype=np.float64).ravel()
        if len(self.beq) != self.Aeq.shape[0]:
            raise ValueError("beq length mismatch")
        self.lower = np.asarray(self.lower, dtype=np.float64).ravel()
        self.upper = np.asarray(self.upper, dtype=np.float64).ravel()
        if len(self.lower) != n or len(self.upper) != n:
            raise ValueError("bound length mismatch")
        if np.any(self.lower > self.upper):
            raise ValueError("lower bound exceeds upper bound")

    @property
    def n(self) -> int:
        return len(self.q)

    @property
    def n_eq(self) -> int:
        return self.Aeq.shape[0]


@dataclass
class QpSolution:
    """Solver output; ``status == 'optimal'`` implies residuals <= tol*scale."""

    x: np.ndarray
    status: str
    primal_residual: float
    dual_residual: float
    gap: float
    iterations: int


def _residuals(prob: QpProblem, x, y) -> tuple[float, float, float]:
    """(stationarity, equality, complementarity) residuals for clipped x.

    The bound dual z is chosen as the sign-cone projection of the full
    gradient ``P x + q + Aeq' y`` (non-negative where only a lower bound
    exists, non-positive where only an upper bound exists), which is the
    most favourable valid certificate for the given (x, y).
    """
    grad = prob.P @ x + prob.q + prob.Aeq.T @ y
    z = grad.copy()
    lower_only = np.isfinite(prob.lower) & ~np.isfinite(prob.upper)
    upper_only = ~np.isfinite(prob.lower) & np.isfinite(prob.upper)
    unbounded = ~np.isfinite(prob.lower) & ~np.isfinite(prob.upper)
    z[lower_only] = np.maximum(z[lower_only], 0.0)
    z[upper_only] = np.minimum(z[upper_only], 0.0)
    z[unbounded] = 0.0
    r_stat = float(np.abs(grad - z).max()) if prob.n else 0.0
    r_eq = float(np.abs(prob.Aeq @ x - prob.beq).max()) if prob.n_eq else 0.0
    worst = np.zeros_like(x)
    pos = z > 0
    neg = z < 0
    worst[pos] = z[pos] * (x[pos] - prob.lower[pos])
    worst[neg] = -z[neg] * (prob.upper[neg] - x[neg])
    gap = float(worst.max()) if len(worst) else 0.0
    return r_stat, r_eq, gap


class _PolishCache:
    """Equality-constrained solves with frozen active bounds, cached.

    ``min 0.5 x'P_ff x + qhat'x  s.t.  A_f x = bhat`` is solved by the
    augmented-Lagrangian iteration on ``P_ff + beta A_f' A_f``, which is
    positive definite whenever the QP is strictly convex on the feasible
    subspace (so redundant equality rows cost nothing).
    """

    def __init__(self, prob: QpProblem):
        self.prob = prob
        self.signature: tuple | None = None
        self.result: tuple | None = None
        pdiag = prob.P.diagonal() if prob.n else np.zeros(0)
        self.beta = 1e4 * (1.0 + float(np.abs(pdiag).max(initial=0.0)))

    def solve(self, lower_active: np.ndarray, upper_active: np.ndarray):
        """Returns (x, y) at the frozen-bound KKT point, or None on failure."""
        prob = self.prob
        signature = (lower_active.tobytes(), upper_active.tobytes())
        if self.signature == signature:
            return self.result
        self.signature = signature

        n = prob.n
        active = lower_active | upper_active
        x_act = np.where(lower_active, prob.lower, prob.upper)[active]
        free_idx = np.flatnonzero(~active)
        nf = len(free_idx)
        meq = prob.n_eq

        if nf == 0:
            x = np.where(lower_active, prob.lower, prob.upper)
            self.result = (x, np.zeros(meq))
            return self.result

        p_ff = prob.P[free_idx][:, free_idx]
        a_f = prob.Aeq[:, free_idx]
        q_hat = prob.q[free_idx]
        b_hat = prob.beq.copy()
        if np.any(active):
            act_idx = np.flatnonzero(active)
            q_hat = q_hat + prob.P[free_idx][:, act_idx] @ x_act
            b_hat = b_hat - prob.Aeq[:, act_idx] @ x_act

        beta = self.beta
        mat = (p_ff + beta * (a_f.T @ a_f)).tocsc()
        try:
            factor = _SpdFactor(mat)
        except (RuntimeError, ArithmeticError):
            self.result = None
            return None

        y = np.zeros(meq)
        x_f = np.zeros(nf)
        b_scale = 1.0 + float(np.abs(b_hat).max(initial=0.0))
        for _ in range(60):
            rhs = -q_hat + a_f.T @ (beta * b_hat - y)
            x_f = factor.solve(rhs)
            x_f = x_f + factor.solve(rhs - mat @ x_f)  # one refinement
            r = a_f @ x_f - b_hat
            y = y + beta * r  # with this y, stationarity holds exactly for x_f
            if float(np.abs(r).max(initial=0.0)) <= 1e-14 * b_scale:
                break
        if not (np.all(np.isfinite(x_f)) and np.all(np.isfinite(y))):
            self.result = None
            return None

        x = np.empty(n)
        x[free_idx] = x_f
        x[np.flatnonzero(active)] = x_act
        self.result = (x, y)
        return self.result


def _equality_system_consistent(prob: QpProblem, tol: float) -> bool:
    if prob.n_eq == 0:
        return True
    res = scipy.sparse.linalg.lsqr(prob.Aeq, prob.beq, atol=1e-13, btol=1e-13,
                                   iter_lim=20 * (prob.n + prob.n_eq))
    x_ls = res[0]
    resid = np.abs(prob.Aeq @ x_ls - prob.beq).max()
    return resid <= max(tol, 1e-8) * (1.0 + np.abs(prob.beq).max(initial=0.0))


def solve_qp(problem: QpProblem, tol: float = 1e-9,
             max_iter: int = 200000) -> QpSolution:
    """Solve the QP to stationarity/equality/complementarity <= tol*scale.

    ``scale = 1 + max|q|``. Returned ``x`` is always clipped into the bounds
    exactly. ``status`` is ``optimal``, ``max_iterations`` (best iterate with
    its residuals), or ``infeasible`` (inconsistent equality system, detected
    via a least-squares residual).
    """
    prob = problem
    n = prob.n
    scale = 1.0 + (np.abs(prob.q).max() if n else 0.0)
    target = tol * scale
    polish = _PolishCache(prob)

    def finish(x, y, status, iterations) -> QpSolution:
        x = np.clip(x, prob.lower, prob.upper)
        r_stat, r_eq, gap = _residuals(prob, x, y)
        return QpSolution(x=x, status=status, primal_residual=r_eq,
                          dual_residual=r_stat, gap=gap, iterations=iterations)

    def try_polish(lower_active, upper_active, iterations):
        x = y = None
        for _ in range(4):
            out = polish.solve(lower_active, upper_active)
            if out is None:
                return None
            x, y = out
            viol_l = np.where(np.isfinite(prob.lower), prob.lower - x, -np.inf)
            viol_u = np.where(np.isfinite(prob.upper), x - prob.upper, -np.inf)
            worst = max(float(viol_l.max(initial=-np.inf)),
                        float(viol_u.max(initial=-np.inf)))
            if worst <= 1e-13 * scale:
                break
            if worst > 1e-6 * scale:
                return None  # hopeless active-set guess
            # freeze the violating bounds and re-solve
            new_l = lower_active | (viol_l > 1e-13 * scale)
            new_u = upper_active | (viol_u > 1e-13 * scale)
            if (np.array_equal(new_l, lower_active)
                    and np.array_equal(new_u, upper_active)):
                break
            upper_active = new_u
            lower_active = new_l & ~new_u
        x = np.clip(x, prob.lower, prob.upper)
        r_stat, r_eq, gap = _residuals(prob, x, y)
        if max(r_stat, r_eq, gap) <= target:
            return QpSolution(x=x, status=OPTIMAL, primal_residual=r_eq,
                              dual_residual=r_stat, gap=gap, iterations=iterations)
        return None

    # Fast path: no bound active at the optimum (regular meshes).
    none_active = np.zeros(n, dtype=bool)
    sol = try_polish(none_active, none_active, 0)
    if sol is not None:
        return sol

    # ADMM over stacked constraints [Aeq; I].
    meq = prob.n_eq
    cmat = scipy.sparse.vstack([prob.Aeq, scipy.sparse.identity(n, format="csr")],
                               format="csr")
    low = np.concatenate([prob.beq, prob.lower])
    upp = np.concatenate([prob.beq, prob.upper])
    sigma = 1e-6
    alpha = 1.6
    rho_base = 0.1
    max_refactor = 30
    check_every = 25

    def rho_vector(base: float) -> np.ndarray:
        rho = np.full(meq + n, base)
        rho[:meq] *= 1e3
        # rows with equal finite bounds behave like equalities
        tight = np.isfinite(low) & np.isfinite(upp) & (upp - low < 1e-14)
        rho[tight] = base * 1e3
        return rho

    def factor(rho: np.ndarray) -> _SpdFactor:
        mat = (prob.P + sigma * scipy.sparse.identity(n)
               + cmat.T @ scipy.sparse.diags(rho) @ cmat).tocsc()
        return _SpdFactor(mat)

    rho = rho_vector(rho_base)
    lu = factor(rho)
    refactors = 0
    x = np.zeros(n)
    zc = np.clip(cmat @ x, low, upp)
    y = np.zeros(meq + n)
    best = None
    checked_equality = False

    iteration = 0
    while iteration < max_iter:
        iteration += 1
        rhs = sigma * x - prob.q + cmat.T @ (rho * zc - y)
        x_tilde = lu.solve(rhs)
        cx_tilde = cmat @ x_tilde
        x = alpha * x_tilde + (1.0 - alpha) * x
        zc_prev = zc
        zc = np.clip(alpha * cx_tilde + (1.0 - alpha) * zc_prev + y / rho, low, upp)
        y = y + rho * (alpha * cx_tilde + (1.0 - alpha) * zc_prev - zc)

        if iteration % check_every:
            continue
        cx = cmat @ x
        r_prim = float(np.abs(cx - zc).max()) if len(zc) else 0.0
        px = prob.P @ x
        aty = cmat.T @ y
        r_dual = float(np.abs(px + prob.q + aty).max()) if n else 0.0
        prim_ref = max(float(np.abs(cx).max(initial=0.0)),
                       float(np.abs(zc).max(initial=0.0)), 1.0)
        dual_ref = max(float(np.abs(px).max(initial=0.0)),
                       float(np.abs(aty).max(initial=0.0)),
                       float(np.abs(prob.q).max(initial=0.0)), 1.0)
        score = max(r_prim / prim_ref, r_dual / dual_ref)
        if best is None or score < best[0]:
            best = (score, x.copy(), y.copy())

        if score < 1e-5 or (score < 1e-3 and iteration % (check_every * 20) == 0):
            y_bnd = y[meq:]
            lower_active = (y_bnd < 0) & np.isfinite(prob.lower)
            upper_active = (y_bnd > 0) & np.isfinite(prob.upper)
            sol = try_polish(lower_active, upper_active, iteration)
            if sol is not None:
                return sol
            # also consider bounds the iterate presses against
            zx = zc[meq:]
            lower_active |= np.isfinite(prob.lower) & (zx <= prob.lower + 1e-10 * scale)
            upper_active |= np.isfinite(prob.upper) & (zx >= prob.upper - 1e-10 * scale)
            lower_active &= ~upper_active
            sol = try_polish(lower_active, upper_active, iteration)
            if sol is not None:
                return sol

        if score < 1e-9:
            # polish keeps failing but the raw iterate already meets the contract
            x_try = np.clip(x, prob.lower, prob.upper)
            r_stat, r_eq, gap = _residuals(prob, x_try, y[:meq])
            if max(r_stat, r_eq, gap) <= target:
                return QpSolution(x=x_try, status=OPTIMAL, primal_residual=r_eq,
                                  dual_residual=r_stat, gap=gap, iterations=iteration)

        if (not checked_equality and iteration >= 2000 and score > 1e-2):
            checked_equality = True
            if not _equality_system_consistent(prob, tol):
                return finish(x, y[:meq], INFEASIBLE, iteration)

        if refactors < max_refactor and iteration % (check_every * 8) == 0:
            ratio = (r_prim / prim_ref) / max(r_dual / dual_ref, 1e-16)
            if ratio > 25.0 or ratio < 1.0 / 25.0:
                rho_base = float(np.clip(rho_base * np.sqrt(ratio), 1e-6, 1e6))
                rho = rho_vector(rho_base)
                lu = factor(rho)
                refactors += 1

    if not _equality_system_consistent(prob, tol):
        x_best, y_best = (best[1], best[2]) if best else (x, y)
        return finish(x_best, y_best[:meq], INFEASIBLE, max_iter)
    x_best, y_best = (best[1], best[2]) if best else (x, y)
    logger.warning("QP solver hit max_iter=%d (best score %.2e)", max_iter,
                   best[0] if best else float("nan"))
    return finish(x_best, y_best[:meq], MAX_ITERATIONS, max_iter)


def project_onto_polyhedron(point, gmat, h, rel_tol: float = 1e-10):
    """Euclidean projection of ``point`` onto ``{x : G x <= h}``.

    Exact active-set enumeration for tiny systems (n = 3, a handful of
    rows): the first active subset whose KKT solution is primal and dual
    feasible is the projection. Returns None when the polyhedron is
    detected to be empty.
    """
    p = np.asarray(point, dtype=np.float64).ravel()
    gmat = np.atleast_2d(np.asarray(gmat, dtype=np.float64))
    h = np.asarray(h, dtype=np.float64).ravel()
    n = len(p)
    scale = max(1.0, float(np.abs(p).max()), float(np.abs(h).max(initial=0.0)))
    feas_tol = rel_tol * scale

    def feasible(x) -> bool:
        return bool(np.all(gmat @ x <= h + feas_tol))

    if feasible(p):
        return p.copy()
    rows = range(len(gmat))
    for size in range(1, n + 1):
        for subset in combinations(rows, size):
            gs = gmat[list(subset)]
            gram = gs @ gs.T
            if np.linalg.cond(gram) > 1e12:
                continue
            mu = np.linalg.solve(gram, gs @ p - h[list(subset)])
            if np.any(mu < -feas_tol):
                continue
            x = p - gs.T @ mu
            if feasible(x):
                return x
    return None
