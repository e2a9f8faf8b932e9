"""Generalized micromagnetic energy and effective fields.

The local bilinear form is

    a_loc(psi, phi) = sum_d (A_d (d_d psi - J_d psi), d_d phi - J_d phi)

and the full form subtracts the lower-order operator, ``a = a_loc - (pi(.), .)``.
The energy is ``E(m) = a(m, m)/2 - (f, m)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import fem
from .mesh import Mesh

__all__ = [
    "ZeroPi",
    "ScalingPi",
    "UniaxialAnisotropy",
    "MaterialModel",
    "exchange_only",
    "exchange_dmi",
    "general_model",
    "cross_matrix",
    "aloc_matrix",
    "aloc_apply",
    "aloc_eval",
    "a_eval",
    "pi_apply",
    "imex_extrapolate",
    "energy",
    "energy_loc",
    "heffloc_dual",
    "heffloc_field",
    "heff_field",
    "dmi_curl_form",
    "completed_square_identity",
]


@dataclass(frozen=True)
class ZeroPi:
    def apply(self, m: np.ndarray) -> np.ndarray:
        return np.zeros_like(m)

    @property
    def norm(self) -> float:
        return 0.0


@dataclass(frozen=True)
class ScalingPi:
    """m -> c m"""

    c: float

    def apply(self, m: np.ndarray) -> np.ndarray:
        return self.c * m

    @property
    def norm(self) -> float:
        return abs(self.c)


@dataclass(frozen=True)
class UniaxialAnisotropy:
    """m -> c (a . m) a with unit easy axis a."""

    c: float
    axis: tuple = (0.0, 0.0, 1.0)

    def __post_init__(self):
        a = np.asarray(self.axis, dtype=float)
        n = np.linalg.norm(a)
        if a.shape != (3,) or n == 0:
            raise ValueError("anisotropy axis must be a nonzero 3-vector")
        object.__setattr__(self, "axis", tuple((a / n).tolist()))

    def apply(self, m: np.ndarray) -> np.ndarray:
        a = np.asarray(self.axis)
        return self.c * (m @ a)[:, None] * a

    @property
    def norm(self) -> float:
        return abs(self.c)


def cross_matrix(v) -> np.ndarray:
    """[v]_x with [v]_x u = v x u."""
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


@dataclass(frozen=True, eq=False)
class MaterialModel:
    """Coefficients of the energy.

    ``A`` and ``J`` have shape ``(3, 3, 3)`` (index ``d`` first) for spatially
    constant coefficients or ``(n_tets, 3, 3, 3)`` for piecewise constant ones.
    ``f`` is a nodal field or ``None`` for zero.
    """

    A: np.ndarray
    J: np.ndarray
    pi: object = field(default_factory=ZeroPi)
    f: np.ndarray | None = None
    alpha: float = 1.0
    preset: str = "general"
    lex: float | None = None
    ldm: float | None = None
    A0: float = field(init=False)
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        J = np.asarray(self.J, dtype=float)
        if A.shape[-3:] != (3, 3, 3) or A.ndim not in (3, 4):
            raise ValueError(f"A must have shape (3,3,3) or (n_tets,3,3,3), got {A.shape}")
        if J.shape[-3:] != (3, 3, 3) or J.ndim not in (3, 4):
            raise ValueError(f"J must have shape (3,3,3) or (n_tets,3,3,3), got {J.shape}")
        if not np.allclose(A, np.swapaxes(A, -1, -2), rtol=0.0, atol=1e-14):
            raise ValueError("A_d must be symmetric")
        eig_min = float(np.linalg.eigvalsh(A).min())
        if eig_min <= 0:
            raise ValueError(f"A_d must be positive definite (smallest eigenvalue {eig_min})")
        if not self.alpha > 0:
            raise ValueError(f"damping alpha must be positive, got {self.alpha}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "J", J)
        object.__setattr__(self, "A0", eig_min)
        if self.f is not None:
            object.__setattr__(self, "f", np.asarray(self.f, dtype=float))

    def source(self, mesh: Mesh) -> np.ndarray:
        if self.f is None:
            return np.zeros((mesh.n_nodes, 3))
        return fem.check_field(mesh, self.f, "source f")


def exchange_only(lex: float = 1.0, alpha: float = 1.0) -> MaterialModel:
    """A_d = lex^2 Id, J_d = 0, pi = 0, f = 0."""
    A = np.stack([lex**2 * np.eye(3)] * 3)
    return MaterialModel(A=A, J=np.zeros((3, 3, 3)), alpha=alpha, preset="exchange", lex=lex)


def exchange_dmi(lex: float = 1.0, ldm: float = 1.0, alpha: float = 1.0,
                 paper_literal_pi: bool = False) -> MaterialModel:
    """Exchange plus bulk DMI written in the general (A_d, J_d, pi) form.

    J_d = ldm/(2 lex^2) [e_d]_x. The default lower-order operator
    pi = ldm^2/(2 lex^2) Id makes ``a`` coincide with the curl pairing; set
    ``paper_literal_pi`` to use the scaling ldm/(2 lex^2) instead.
    """
    A = np.stack([lex**2 * np.eye(3)] * 3)
    J = np.stack([ldm / (2 * lex**2) * cross_matrix(e) for e in np.eye(3)])
    c = ldm / (2 * lex**2) if paper_literal_pi else ldm**2 / (2 * lex**2)
    return MaterialModel(A=A, J=J, pi=ScalingPi(c), alpha=alpha, preset="exchange_dmi",
                         lex=lex, ldm=ldm)


def general_model(A, J, pi=None, f=None, alpha: float = 1.0) -> MaterialModel:
    return MaterialModel(A=A, J=J, pi=pi if pi is not None else ZeroPi(), f=f, alpha=alpha)


def _per_element(coef: np.ndarray, n_tets: int) -> np.ndarray:
    if coef.ndim == 3:
        return np.broadcast_to(coef, (n_tets, 3, 3, 3))
    if coef.shape[0] != n_tets:
        raise ValueError("piecewise constant coefficients do not match the mesh")
    return coef


def aloc_matrix(model: MaterialModel, mesh: Mesh) -> sp.csr_matrix:
    """Sparse matrix of a_loc acting on flattened nodal fields (index 3*z + c)."""
    cached = model._cache.get("aloc")
    if cached is not None and cached[0] is mesh:
        return cached[1]

    T = mesh.n_tets
    A = _per_element(model.A, T)
    J = _per_element(model.J, T)
    g = fem.barycentric_gradients(mesh)
    vol = mesh.volumes
    AJ = A @ J
    JtA = np.swapaxes(J, -1, -2) @ A
    JtAJ = JtA @ J

    local = np.einsum("t,tid,tjd,tdab->tijab", vol, g, g, A)
    local -= np.einsum("t,tid,tdab->tiab", vol / 4.0, g, AJ)[:, :, None, :, :]
    local -= np.einsum("t,tjd,tdab->tjab", vol / 4.0, g, JtA)[:, None, :, :, :]
    mass = (np.ones((4, 4)) + np.eye(4)) / 20.0
    local += np.einsum("t,ij,tab->tijab", vol, mass, JtAJ.sum(axis=1))

    tets = mesh.tetrahedra
    rows = 3 * tets[:, :, None, None, None] + np.arange(3)[None, None, None, :, None]
    cols = 3 * tets[:, None, :, None, None] + np.arange(3)[None, None, None, None, :]
    rows = np.broadcast_to(rows, local.shape).ravel()
    cols = np.broadcast_to(cols, local.shape).ravel()
    n = 3 * mesh.n_nodes
    K = sp.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    K.sum_duplicates()
    model._cache["aloc"] = (mesh, K)
    return K


def aloc_apply(model: MaterialModel, mesh: Mesh, psi) -> np.ndarray:
    """Dual vector d with d . [phi] = a_loc(psi, phi)."""
    psi = fem.check_field(mesh, psi, "psi")
    return (aloc_matrix(model, mesh) @ psi.ravel()).reshape(-1, 3)


def aloc_eval(model: MaterialModel, mesh: Mesh, psi, phi) -> float:
    phi = fem.check_field(mesh, phi, "phi")
    return float(np.sum(aloc_apply(model, mesh, psi) * phi))


def pi_apply(model: MaterialModel, mesh: Mesh, m) -> np.ndarray:
    """Nodal application of the lower-order operator."""
    return model.pi.apply(fem.check_field(mesh, m))


def a_eval(model: MaterialModel, mesh: Mesh, psi, phi) -> float:
    return aloc_eval(model, mesh, psi, phi) - fem.l2_inner(mesh, pi_apply(model, mesh, psi), phi)


def imex_extrapolate(model: MaterialModel, mesh: Mesh, m_i, m_im1) -> np.ndarray:
    """3/2 pi_h(m^i) - 1/2 pi_h(m^{i-1})."""
    return 1.5 * pi_apply(model, mesh, m_i) - 0.5 * pi_apply(model, mesh, m_im1)


def energy_loc(model: MaterialModel, mesh: Mesh, m) -> float:
    m = fem.check_field(mesh, m)
    return 0.5 * aloc_eval(model, mesh, m, m) - fem.l2_inner(mesh, model.source(mesh), m)


def energy(model: MaterialModel, mesh: Mesh, m) -> float:
    m = fem.check_field(mesh, m)
    return 0.5 * a_eval(model, mesh, m, m) - fem.l2_inner(mesh, model.source(mesh), m)


def heffloc_dual(model: MaterialModel, mesh: Mesh, m, include_f: bool = True) -> np.ndarray:
    """Dual vector of <h_eff,loc(m), .> = (f, .) - a_loc(m, .)."""
    d = -aloc_apply(model, mesh, m)
    if include_f and model.f is not None:
        d += fem.l2_action(mesh, model.source(mesh))
    return d


def heffloc_field(model: MaterialModel, mesh: Mesh, weights: np.ndarray, m,
                  include_f: bool = True) -> np.ndarray:
    """P_h h_eff,loc(m); with ``include_f=False`` this is P_h(h_eff,loc(m) - f)."""
    return fem.riesz_lumped(weights, heffloc_dual(model, mesh, m, include_f))


def heff_field(model: MaterialModel, mesh: Mesh, weights: np.ndarray, m) -> np.ndarray:
    """P_h h_eff(m), including the lower-order operator."""
    d = heffloc_dual(model, mesh, m) + fem.l2_action(mesh, pi_apply(model, mesh, m))
    return fem.riesz_lumped(weights, d)


def _curl(G: np.ndarray) -> np.ndarray:
    # G[t, c, d] = d u_c / d x_d
    return np.stack([G[:, 2, 1] - G[:, 1, 2], G[:, 0, 2] - G[:, 2, 0], G[:, 1, 0] - G[:, 0, 1]], axis=1)


def dmi_curl_form(mesh: Mesh, lex: float, ldm: float, psi, phi) -> float:
    """-lex^2 (grad psi, grad phi) - ldm/2 (curl psi, phi) - ldm/2 (psi, curl phi)."""
    psi = fem.check_field(mesh, psi, "psi")
    phi = fem.check_field(mesh, phi, "phi")
    Gp = fem.element_gradients(mesh, psi)
    Gf = fem.element_gradients(mesh, phi)
    vol = mesh.volumes
    grad_term = float(np.dot(vol, np.sum(Gp * Gf, axis=(1, 2))))
    psi_mean = psi[mesh.tetrahedra].mean(axis=1)
    phi_mean = phi[mesh.tetrahedra].mean(axis=1)
    curl_psi_phi = float(np.dot(vol, np.sum(_curl(Gp) * phi_mean, axis=1)))
    psi_curl_phi = float(np.dot(vol, np.sum(psi_mean * _curl(Gf), axis=1)))
    return -lex**2 * grad_term - 0.5 * ldm * curl_psi_phi - 0.5 * ldm * psi_curl_phi


def completed_square_identity(A, K, s, xi) -> tuple[float, float]:
    """Both sides of the completed-square rewriting of the energy density.

    ``A``: three SPD matrices, ``K``: three antisymmetric matrices, ``s``: a
    3-vector, ``xi``: 3x3 with ``xi[d]`` the d-th partial derivative.
    """
    A = np.asarray(A, dtype=float)
    K = np.asarray(K, dtype=float)
    s = np.asarray(s, dtype=float)
    xi = np.asarray(xi, dtype=float)
    lhs = 0.0
    rhs = 0.0
    for d in range(3):
        try:
            w = np.linalg.solve(A[d], K[d] @ s)
        except np.linalg.LinAlgError as exc:
            raise ValueError(f"A_{d + 1} is singular") from exc
        lhs += 0.5 * (A[d] @ xi[d] @ xi[d] - 2.0 * (K[d] @ s) @ xi[d])
        r = xi[d] - w
        rhs += 0.5 * (A[d] @ r @ r) + 0.5 * (K[d] @ w) @ s
    return float(lhs), float(rhs)
