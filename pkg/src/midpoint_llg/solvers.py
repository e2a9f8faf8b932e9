"""Nonlinear solvers for one midpoint time-step.

Every solver computes the midpoint value ``eta = (m^{i+1} + m^i)/2`` from the
nodal system

    eta - m^i + k/2 eta x P_h(h_eff,loc(eta) + Pi) + alpha eta x m^i = 0,

where all terms are nodal because the inner product is mass-lumped.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from . import fem
from .mesh import Mesh
from .model import MaterialModel, aloc_matrix, heffloc_field

__all__ = [
    "StepProblem",
    "SolverReport",
    "NonConvergenceError",
    "LinearSolverError",
    "gmres_solve",
    "fixed_point_solve",
    "newton_residual",
    "jacobian_apply",
    "jacobian_matrix",
    "newton_solve",
    "dense_oracle_solve",
    "solve_nodal_rotation",
]

log = logging.getLogger(__name__)

ITERATION_CAP = 100
LINEAR_TOL = 1e-14
LINEAR_MAX_ITER = 1000


class NonConvergenceError(RuntimeError):
    """Raised when a nonlinear solve misses its tolerance within the cap."""

    def __init__(self, message: str, report: "SolverReport | None" = None):
        super().__init__(message)
        self.report = report


class LinearSolverError(RuntimeError):
    def __init__(self, message: str, x: np.ndarray, residual: float):
        super().__init__(message)
        self.x = x
        self.residual = residual


@dataclass
class StepProblem:
    """Data of the nonlinear system of one time-step.

    ``pi_field`` is the explicit lower-order field Pi_h(m^i, m^{i-1}).
    """

    m_i: np.ndarray
    pi_field: np.ndarray
    k: float
    model: MaterialModel
    mesh: Mesh
    weights: np.ndarray
    alpha: float | None = None

    def __post_init__(self):
        if not self.k >= 0:
            raise ValueError(f"time-step size must be non-negative, got {self.k}")
        self.m_i = fem.check_field(self.mesh, self.m_i, "m_i")
        self.pi_field = fem.check_field(self.mesh, self.pi_field, "pi_field")
        if self.alpha is None:
            self.alpha = self.model.alpha
        # P_h of the L2 functional (Pi, .)
        self.pi_riesz = fem.riesz_lumped(self.weights, fem.l2_action(self.mesh, self.pi_field))

    def heffloc(self, x: np.ndarray, include_f: bool = True) -> np.ndarray:
        return heffloc_field(self.model, self.mesh, self.weights, x, include_f)


@dataclass
class SolverReport:
    eta: np.ndarray
    iterations: int
    residual_norm: float
    r_field: np.ndarray
    converged: bool
    residual_history: list = field(default_factory=list)
    # fixed-point only: P_h(h_eff,loc(eta^{l*+1}) - h_eff,loc(eta^{l*})) before the cross product
    r_raw: np.ndarray | None = None
    # fixed-point only: ||eta^{l+1} - eta^l||_h per sweep
    increment_history: list = field(default_factory=list)
    linear_iterations: list = field(default_factory=list)
    solver: str = ""


def gmres_solve(apply, rhs, rel_tol: float = LINEAR_TOL, max_iter: int = LINEAR_MAX_ITER) -> tuple[np.ndarray, int]:
    """Full GMRES with modified Gram-Schmidt, started from zero.

    Returns ``(x, iterations)`` with ``||apply(x) - rhs|| <= rel_tol ||rhs||``.
    Once the Arnoldi estimate reaches the tolerance the true residual is
    checked; if roundoff left it above tolerance the remaining budget is spent
    on a correction solve.
    """
    b = np.asarray(rhs, dtype=float).ravel()
    n = b.size
    bnorm = float(np.linalg.norm(b))
    x = np.zeros(n)
    if bnorm == 0.0:
        return x, 0
    if not np.isfinite(bnorm):
        raise LinearSolverError("right-hand side is not finite", x, np.inf)
    target = rel_tol * bnorm

    total = 0
    r = b.copy()
    rnorm = bnorm
    best_x, best_res = x.copy(), rnorm
    while total < max_iter:
        m = min(max_iter - total, n)
        V = np.empty((min(m, 64) + 1, n))  # grown on demand
        R = []  # columns of the rotated Hessenberg matrix
        cs: list[float] = []
        sn: list[float] = []
        g = [rnorm]
        V[0] = r / rnorm
        j_done = 0
        for j in range(m):
            w = np.array(apply(V[j]), dtype=float).ravel()  # copy: apply may return its input
            col = []
            for i in range(j + 1):
                hij = float(np.dot(w, V[i]))
                w -= hij * V[i]
                col.append(hij)
            h_next = float(np.linalg.norm(w))
            if j + 1 >= V.shape[0]:
                V = np.concatenate([V, np.empty((min(V.shape[0], m + 1 - V.shape[0]), n))])
            if h_next > 0:
                V[j + 1] = w / h_next
            for i in range(j):
                top, low = col[i], col[i + 1]
                col[i] = cs[i] * top + sn[i] * low
                col[i + 1] = -sn[i] * top + cs[i] * low
            denom = math.hypot(col[j], h_next)
            if denom == 0.0:
                break
            cs.append(col[j] / denom)
            sn.append(h_next / denom)
            col[j] = denom
            R.append(col)
            g.append(-sn[j] * g[j])
            g[j] = cs[j] * g[j]
            j_done = j + 1
            if abs(g[j + 1]) <= 0.5 * target or h_next == 0.0:
                break
        total += max(j_done, 1)
        if j_done == 0:
            break
        Rm = np.zeros((j_done, j_done))
        for jj, col in enumerate(R):
            Rm[: jj + 1, jj] = col
        y = scipy.linalg.solve_triangular(Rm, np.array(g[:j_done]))
        x = x + y @ V[:j_done]
        r = b - np.asarray(apply(x), dtype=float).ravel()
        rnorm = float(np.linalg.norm(r))
        if not np.isfinite(rnorm):
            break
        if rnorm < best_res:
            best_x, best_res = x.copy(), rnorm
        if rnorm <= target:
            return x, total
    raise LinearSolverError(
        f"GMRES did not reach relative residual {rel_tol:g} within {max_iter} iterations "
        f"(best {best_res / bnorm:.3e})",
        best_x,
        best_res,
    )


def solve_nodal_rotation(v: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve x + x cross v = rhs independently at every node.

    ``(I - [v]_x)^{-1} = (I + [v]_x + v v^T) / (1 + |v|^2)``.
    """
    vv = np.einsum("ij,ij->i", v, v)
    vr = np.einsum("ij,ij->i", v, rhs)
    return (rhs + fem.cross(v, rhs) + vr[:, None] * v) / (1.0 + vv)[:, None]


def _length_check(eta: np.ndarray, m_i: np.ndarray) -> None:
    ln_eta = np.linalg.norm(eta, axis=1)
    ln_m = np.linalg.norm(m_i, axis=1)
    if np.any(ln_eta > ln_m * (1 + 1e-12) + 1e-15):
        worst = float(np.max(ln_eta - ln_m))
        raise AssertionError(f"fixed-point iterate exceeds nodal length of m_i by {worst:.3e}")


def fixed_point_solve(problem: StepProblem, eps: float, max_iter: int = ITERATION_CAP) -> SolverReport:
    """Constraint-preserving fixed-point iteration.

    Each sweep freezes the local effective field at the previous iterate and
    solves the remaining linear problem exactly node by node.
    """
    if not eps > 0:
        raise ValueError(f"tolerance eps must be positive, got {eps}")
    p = problem
    w = p.weights
    eta = p.m_i.copy()
    H_prev = p.heffloc(eta)
    history: list[float] = []
    increments: list[float] = []
    for ell in range(max_iter):
        v = 0.5 * p.k * (H_prev + p.pi_riesz) + p.alpha * p.m_i
        eta_new = solve_nodal_rotation(v, p.m_i)
        _length_check(eta_new, p.m_i)
        H_new = p.heffloc(eta_new)
        r_raw = H_new - H_prev
        r_field = fem.cross(eta_new, r_raw)
        s = fem.lumped_norm(w, r_field)
        history.append(s)
        increments.append(fem.lumped_norm(w, eta_new - eta))
        if not np.isfinite(s):
            break
        if s <= eps:
            return SolverReport(eta=eta_new, iterations=ell + 1, residual_norm=s, r_field=r_field,
                                converged=True, residual_history=history, r_raw=r_raw,
                                increment_history=increments, solver="fixedpoint")
        eta, H_prev = eta_new, H_new
    report = SolverReport(eta=eta, iterations=len(history), residual_norm=history[-1] if history else np.nan,
                          r_field=np.zeros_like(eta), converged=False, residual_history=history,
                          increment_history=increments, solver="fixedpoint")
    raise NonConvergenceError(
        f"fixed-point iteration missed eps={eps:g} within {max_iter} iterations", report)


def _scaled_residual(p: StepProblem, x: np.ndarray, H: np.ndarray) -> np.ndarray:
    return x - p.m_i + fem.cross(x, 0.5 * p.k * (H + p.pi_riesz)) + p.alpha * fem.cross(x, p.m_i)


def newton_residual(problem: StepProblem, x) -> np.ndarray:
    """F(x) = M (x - m_i + I_h[k/2 x x P_h(h_eff,loc(x) + Pi) + alpha x x m_i])."""
    x = fem.check_field(problem.mesh, x)
    return problem.weights[:, None] * _scaled_residual(problem, x, problem.heffloc(x))


def _jacobian_scaled(p: StepProblem, x: np.ndarray, H: np.ndarray, u: np.ndarray) -> np.ndarray:
    Hu = p.heffloc(u, include_f=False)
    return (u + fem.cross(u, 0.5 * p.k * (H + p.pi_riesz)) + 0.5 * p.k * fem.cross(x, Hu)
            + p.alpha * fem.cross(u, p.m_i))


def _cross_blocks(v: np.ndarray) -> np.ndarray:
    """Stack of 3x3 matrices of u -> v(z) x u, one per node."""
    blocks = np.zeros((v.shape[0], 3, 3))
    x, y, z = v.T
    blocks[:, 0, 1], blocks[:, 0, 2] = -z, y
    blocks[:, 1, 0], blocks[:, 1, 2] = z, -x
    blocks[:, 2, 0], blocks[:, 2, 1] = -y, x
    return blocks


def _aloc_blocks(model: MaterialModel, mesh: Mesh):
    """a_loc in 3x3 block form plus the position of each diagonal block."""
    cached = model._cache.get("aloc_bsr")
    if cached is not None and cached[0] is mesh:
        return cached[1:]
    Kb = aloc_matrix(model, mesh).tobsr(blocksize=(3, 3))
    Kb.sort_indices()
    block_row = np.repeat(np.arange(mesh.n_nodes), np.diff(Kb.indptr))
    diag = np.flatnonzero(Kb.indices == block_row)
    # CSR pattern of the expanded blocks and where each block entry lands in it
    # (CSR matvecs are markedly faster than BSR ones in scipy)
    tag = sp.bsr_matrix((np.arange(1.0, Kb.data.size + 1).reshape(Kb.data.shape), Kb.indices, Kb.indptr),
                        shape=Kb.shape).tocsr()
    tag.sort_indices()
    order = tag.data.astype(np.int64) - 1
    pattern = (tag.indices, tag.indptr)
    model._cache["aloc_bsr"] = (mesh, Kb, block_row, diag, order, pattern)
    return Kb, block_row, diag, order, pattern


def jacobian_matrix(problem: StepProblem, x) -> sp.csr_matrix:
    """Assembled nodal Jacobian of the scaled residual at x.

    Same operator as :func:`jacobian_apply` without the lumped-mass row
    scaling; Newton assembles it once per iteration so each Krylov step is a
    single sparse product.
    """
    p = problem
    x = fem.check_field(p.mesh, x)
    Kb, block_row, diag, order, (indices, indptr) = _aloc_blocks(p.model, p.mesh)
    a = 0.5 * p.k * (p.heffloc(x) + p.pi_riesz)
    # (k/2) x cross P_h(-a_loc u): row block z scaled by [x_z]_x / beta_z
    left = _cross_blocks(x) * (-0.5 * p.k / p.weights)[:, None, None]
    data = np.matmul(left[block_row], Kb.data)
    data[diag] += np.eye(3) - _cross_blocks(a) - p.alpha * _cross_blocks(p.m_i)
    return sp.csr_matrix((data.ravel()[order], indices, indptr), shape=Kb.shape)


def jacobian_apply(problem: StepProblem, x, u) -> np.ndarray:
    """Action of the Jacobian of F at x on the direction u (as a dual vector)."""
    x = fem.check_field(problem.mesh, x)
    u = fem.check_field(problem.mesh, u, "u")
    return problem.weights[:, None] * _jacobian_scaled(problem, x, problem.heffloc(x), u)


def newton_solve(problem: StepProblem, eps: float, max_iter: int = ITERATION_CAP,
                 linear_tol: float = LINEAR_TOL, linear_max_iter: int = LINEAR_MAX_ITER) -> SolverReport:
    """Undamped Newton iteration with GMRES inner solves.

    The linear systems are left-preconditioned by the inverse lumped mass, so
    GMRES works on nodal values directly.
    """
    if not eps > 0:
        raise ValueError(f"tolerance eps must be positive, got {eps}")
    p = problem
    w = p.weights
    eta = p.m_i.copy()
    history: list[float] = []
    lin_its: list[int] = []
    reason = f"Newton iteration missed eps={eps:g} within {max_iter} iterations"
    for ell in range(max_iter):
        rhs = -_scaled_residual(p, eta, p.heffloc(eta))
        jac = jacobian_matrix(p, eta)
        try:
            u, its = gmres_solve(jac.dot, rhs.ravel(), linear_tol, linear_max_iter)
        except LinearSolverError as exc:
            reason = f"inner GMRES failed in Newton iteration {ell}: {exc}"
            break
        lin_its.append(its)
        u = u.reshape(-1, 3)
        r_field = fem.cross(u, p.heffloc(u, include_f=False))
        s = fem.lumped_norm(w, r_field)
        history.append(s)
        eta = eta + u
        if not (np.isfinite(s) and np.all(np.isfinite(eta))):
            reason = "Newton iteration diverged (non-finite iterate)"
            break
        if s <= eps:
            return SolverReport(eta=eta, iterations=ell + 1, residual_norm=s, r_field=r_field,
                                converged=True, residual_history=history, linear_iterations=lin_its,
                                solver="newton")
    report = SolverReport(eta=eta, iterations=len(history), residual_norm=history[-1] if history else np.nan,
                          r_field=np.zeros_like(eta), converged=False, residual_history=history,
                          linear_iterations=lin_its, solver="newton")
    raise NonConvergenceError(reason, report)


def _blockdiag_cross(vectors: np.ndarray) -> np.ndarray:
    n = vectors.shape[0]
    out = np.zeros((3 * n, 3 * n))
    x, y, z = vectors.T
    for a, b, val in ((0, 1, -z), (0, 2, y), (1, 0, z), (1, 2, -x), (2, 0, -y), (2, 1, x)):
        out[3 * np.arange(n) + a, 3 * np.arange(n) + b] = val
    return out


def dense_oracle_solve(problem: StepProblem, tol: float = 1e-13, max_iter: int = 200) -> np.ndarray:
    """Damped Newton on the densely assembled Jacobian; verification only.

    The Jacobian is written out as explicit cross-product matrices instead of
    reusing the matrix-free operator, and a backtracking line search on
    ``||F||_2`` globalizes the iteration.
    """
    p = problem
    n = p.mesh.n_nodes
    if n > 125:
        raise ValueError("dense oracle is limited to at most 125 nodes")
    K = aloc_matrix(p.model, p.mesh).toarray()
    Winv = np.repeat(1.0 / p.weights, 3)
    M = np.repeat(p.weights, 3)
    src = fem.l2_action(p.mesh, p.model.source(p.mesh)).ravel()
    b_const = Winv * src + p.pi_riesz.ravel()
    m = p.m_i.ravel()
    Cm = _blockdiag_cross(p.m_i)

    def field_B(x):
        return b_const - Winv * (K @ x)

    def F(x):
        X = _blockdiag_cross(x.reshape(-1, 3))
        return M * (x - m + 0.5 * p.k * X @ field_B(x) + p.alpha * X @ m)

    def jac(x):
        X = _blockdiag_cross(x.reshape(-1, 3))
        B = _blockdiag_cross(field_B(x).reshape(-1, 3))
        Jm = np.eye(3 * n) - 0.5 * p.k * B - 0.5 * p.k * X @ (Winv[:, None] * K) - p.alpha * Cm
        return M[:, None] * Jm

    x = m.copy()
    Fx = F(x)
    fnorm = np.linalg.norm(Fx)
    for _ in range(max_iter):
        if fnorm <= tol:
            return x.reshape(-1, 3)
        dx = np.linalg.solve(jac(x), -Fx)
        t = 1.0
        while t > 1e-10:
            x_new = x + t * dx
            F_new = F(x_new)
            if np.linalg.norm(F_new) < (1 - 1e-4 * t) * fnorm or np.linalg.norm(F_new) <= tol:
                break
            t *= 0.5
        else:
            raise NonConvergenceError(f"dense oracle line search stagnated at ||F|| = {fnorm:.3e}")
        x, Fx = x_new, F_new
        fnorm = np.linalg.norm(Fx)
    if fnorm <= tol:
        return x.reshape(-1, 3)
    raise NonConvergenceError(f"dense oracle did not reach ||F|| <= {tol:g} (got {fnorm:.3e})")
