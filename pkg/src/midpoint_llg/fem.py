"""P1 finite element primitives on tetrahedral meshes.

Vector fields are stored as ``(n_nodes, 3)`` arrays of nodal values. A dual
vector (a functional restricted to the P1 space) uses the same layout: row
``z`` holds the pairing coefficients against the hat function of node ``z``
in each component. All element integrals are evaluated in closed form.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .mesh import Mesh

__all__ = [
    "lumped_weights",
    "mass_lumped_inner",
    "lumped_norm",
    "l2_inner",
    "l2_norm",
    "consistent_mass_matrix",
    "stiffness_matrix",
    "l2_action",
    "nodal_interpolate",
    "riesz_lumped",
    "barycentric_gradients",
    "element_gradients",
    "h1_seminorm_sq",
    "check_field",
    "cross",
]


def check_field(mesh: Mesh, u, name: str = "field") -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if u.shape != (mesh.n_nodes, 3):
        raise ValueError(f"{name} has shape {u.shape}, expected ({mesh.n_nodes}, 3) for this mesh")
    return u


def cross(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Nodewise cross product of two ``(n, 3)`` arrays."""
    out = np.empty(np.broadcast_shapes(u.shape, v.shape))
    out[:, 0] = u[:, 1] * v[:, 2] - u[:, 2] * v[:, 1]
    out[:, 1] = u[:, 2] * v[:, 0] - u[:, 0] * v[:, 2]
    out[:, 2] = u[:, 0] * v[:, 1] - u[:, 1] * v[:, 0]
    return out


def lumped_weights(mesh: Mesh) -> np.ndarray:
    """beta_z = integral of the hat function of node z = sum over K ∋ z of |K|/4."""
    if "beta" not in mesh._cache:
        beta = np.zeros(mesh.n_nodes)
        np.add.at(beta, mesh.tetrahedra.ravel(), np.repeat(mesh.volumes / 4.0, 4))
        beta.setflags(write=False)
        mesh._cache["beta"] = beta
    return mesh._cache["beta"]


def mass_lumped_inner(weights: np.ndarray, u, v) -> float:
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape or u.shape[0] != weights.shape[0]:
        raise ValueError("fields do not live on the same mesh")
    return float(np.dot(weights, np.einsum("ij,ij->i", u, v)))


def lumped_norm(weights: np.ndarray, u) -> float:
    return float(np.sqrt(mass_lumped_inner(weights, u, u)))


def barycentric_gradients(mesh: Mesh) -> np.ndarray:
    """Constant gradients of the four barycentric coordinates, ``(n_tets, 4, 3)``."""
    if "grad_lambda" not in mesh._cache:
        p = mesh.vertices[mesh.tetrahedra]
        B = p[:, 1:, :] - p[:, :1, :]  # rows are edge vectors
        Binv = np.linalg.inv(B)  # columns are gradients of lambda_1..3
        g = np.empty((mesh.n_tets, 4, 3))
        g[:, 1:, :] = np.transpose(Binv, (0, 2, 1))
        g[:, 0, :] = -g[:, 1:, :].sum(axis=1)
        g.setflags(write=False)
        mesh._cache["grad_lambda"] = g
    return mesh._cache["grad_lambda"]


def _scatter_scalar(mesh: Mesh, local: np.ndarray) -> sp.csr_matrix:
    t = mesh.tetrahedra
    rows = np.repeat(t, 4, axis=1).ravel()
    cols = np.tile(t, (1, 4)).ravel()
    n = mesh.n_nodes
    return sp.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)).tocsr()


def consistent_mass_matrix(mesh: Mesh) -> sp.csr_matrix:
    """Scalar P1 mass matrix, ``int_K phi_i phi_j = |K| (1 + delta_ij) / 20``."""
    if "mass" not in mesh._cache:
        local = (np.ones((4, 4)) + np.eye(4)) / 20.0
        mesh._cache["mass"] = _scatter_scalar(mesh, mesh.volumes[:, None, None] * local)
    return mesh._cache["mass"]


def stiffness_matrix(mesh: Mesh) -> sp.csr_matrix:
    """Scalar P1 stiffness matrix ``int grad phi_i . grad phi_j``."""
    if "stiffness" not in mesh._cache:
        g = barycentric_gradients(mesh)
        local = mesh.volumes[:, None, None] * np.einsum("tic,tjc->tij", g, g)
        mesh._cache["stiffness"] = _scatter_scalar(mesh, local)
    return mesh._cache["stiffness"]


def l2_action(mesh: Mesh, u) -> np.ndarray:
    """Dual vector of ``phi -> (u, phi)_{L2}`` for a P1 field u."""
    u = check_field(mesh, u)
    return consistent_mass_matrix(mesh) @ u


def l2_inner(mesh: Mesh, u, v) -> float:
    """Exact L2 inner product of two P1 vector fields."""
    u = check_field(mesh, u, "u")
    v = check_field(mesh, v, "v")
    return float(np.sum(u * (consistent_mass_matrix(mesh) @ v)))


def l2_norm(mesh: Mesh, u) -> float:
    return float(np.sqrt(l2_inner(mesh, u, u)))


def nodal_interpolate(mesh: Mesh, g) -> np.ndarray:
    """Sample a pointwise vector function at the mesh nodes.

    ``g`` receives the ``(n_nodes, 3)`` coordinate array and must return an
    array of the same shape (a vectorised callable). Constants are broadcast.
    """
    if callable(g):
        values = np.asarray(g(mesh.vertices), dtype=float)
    else:
        values = np.asarray(g, dtype=float)
    values = np.broadcast_to(values, (mesh.n_nodes, 3)).copy()
    if not np.all(np.isfinite(values)):
        bad = np.flatnonzero(~np.all(np.isfinite(values), axis=1))
        raise ValueError(f"interpolated function is not finite at node(s) {bad[:5].tolist()}")
    return values


def riesz_lumped(weights: np.ndarray, d) -> np.ndarray:
    """Representative of a dual vector in the mass-lumped inner product."""
    d = np.asarray(d, dtype=float)
    if np.any(weights <= 0):
        raise ValueError("lumped weights must be positive")
    return d / weights[:, None]


def element_gradients(mesh: Mesh, u) -> np.ndarray:
    """Per-element Jacobians ``G[K, c, d] = d u_c / d x_d`` of a P1 field."""
    u = check_field(mesh, u)
    g = barycentric_gradients(mesh)
    return np.einsum("tic,tid->tcd", u[mesh.tetrahedra], g)


def h1_seminorm_sq(mesh: Mesh, u) -> float:
    G = element_gradients(mesh, u)
    return float(np.dot(mesh.volumes, np.sum(G * G, axis=(1, 2))))
