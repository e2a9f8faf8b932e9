import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from midpoint_llg import fem
from midpoint_llg.diagnostics import inverse_constant, norm_ratio_bounds
from midpoint_llg.mesh import build_unit_cube_mesh

# 4-point rule, exact for quadratics on a tetrahedron (barycentric coordinates)
_A, _B = 0.5854101966249685, 0.1381966011250105
QUAD_BARY = np.array([[_A, _B, _B, _B], [_B, _A, _B, _B], [_B, _B, _A, _B], [_B, _B, _B, _A]])


def quad_l2(mesh, u, v):
    total = 0.0
    for t, vol in zip(mesh.tetrahedra, mesh.volumes):
        uq = QUAD_BARY @ u[t]
        vq = QUAD_BARY @ v[t]
        total += vol / 4 * np.sum(uq * vq)
    return total


def hat(mesh, z, c=0):
    u = np.zeros((mesh.n_nodes, 3))
    u[z, c] = 1.0
    return u


def test_lumped_weights_single_cube():
    mesh = build_unit_cube_mesh(1)
    beta = fem.lumped_weights(mesh)
    assert math.isclose(beta[0], 0.25) and math.isclose(beta[7], 0.25)
    assert np.allclose(beta[1:7], 1 / 12)
    assert math.isclose(beta.sum(), 1.0, rel_tol=1e-12)


@pytest.mark.parametrize("N", [2, 5])
def test_lumped_weights_positive_partition(N):
    beta = fem.lumped_weights(build_unit_cube_mesh(N))
    assert np.all(beta > 0) and math.isclose(beta.sum(), 1.0, rel_tol=1e-12)


def test_mass_lumped_inner_examples():
    mesh = build_unit_cube_mesh(3)
    w = fem.lumped_weights(mesh)
    e1 = np.tile([1.0, 0, 0], (mesh.n_nodes, 1))
    e2 = np.tile([0, 1.0, 0], (mesh.n_nodes, 1))
    assert math.isclose(fem.mass_lumped_inner(w, e1, e1), 1.0, rel_tol=1e-13)
    assert fem.mass_lumped_inner(w, e1, e2) == 0.0
    one = build_unit_cube_mesh(1)
    assert math.isclose(fem.mass_lumped_inner(fem.lumped_weights(one), hat(one, 0), hat(one, 0)), 0.25)
    with pytest.raises(ValueError):
        fem.mass_lumped_inner(w, e1, e1[:-1])


def test_l2_inner_examples(rng):
    one = build_unit_cube_mesh(1)
    assert math.isclose(fem.l2_inner(one, hat(one, 0), hat(one, 0)), 0.1, rel_tol=1e-14)
    mesh = build_unit_cube_mesh(2)
    e1 = np.tile([1.0, 0, 0], (mesh.n_nodes, 1))
    assert math.isclose(fem.l2_inner(mesh, e1, e1), 1.0, rel_tol=1e-13)
    u, v = rng.standard_normal((2, mesh.n_nodes, 3))
    assert abs(fem.l2_inner(mesh, u, v) - quad_l2(mesh, u, v)) <= 1e-13
    with pytest.raises(ValueError):
        fem.l2_inner(mesh, u, np.zeros((5, 3)))


def test_nodal_interpolate():
    mesh = build_unit_cube_mesh(2)
    c = np.array([0.3, -1.0, 2.0])
    assert np.array_equal(fem.nodal_interpolate(mesh, c), np.tile(c, (mesh.n_nodes, 1)))
    lin = fem.nodal_interpolate(mesh, lambda x: 2 * x + 1)
    assert np.array_equal(lin, 2 * mesh.vertices + 1)
    with pytest.raises(ValueError, match="not finite"), np.errstate(divide="ignore", invalid="ignore"):
        fem.nodal_interpolate(mesh, lambda x: x / np.linalg.norm(x, axis=1)[:, None])


def test_interpolated_product_matches_lumped_inner(rng):
    mesh = build_unit_cube_mesh(2)
    w = fem.lumped_weights(mesh)
    u, v = rng.standard_normal((2, mesh.n_nodes, 3))
    prod = fem.nodal_interpolate(mesh, lambda x: np.stack([np.sum(u * v, axis=1), 0 * x[:, 0], 0 * x[:, 0]], 1))
    assert math.isclose(np.dot(w, prod[:, 0]), fem.mass_lumped_inner(w, u, v), rel_tol=1e-13)


def test_riesz_lumped(rng):
    mesh = build_unit_cube_mesh(2)
    w = fem.lumped_weights(mesh)
    assert np.array_equal(fem.riesz_lumped(w, np.zeros((mesh.n_nodes, 3))), np.zeros((mesh.n_nodes, 3)))
    c = np.array([1.0, 2.0, -0.5])
    assert np.allclose(fem.riesz_lumped(w, w[:, None] * c), c, rtol=0, atol=1e-15)
    u = rng.standard_normal((mesh.n_nodes, 3))
    Pu = fem.riesz_lumped(w, fem.l2_action(mesh, u))
    for _ in range(20):
        phi = rng.standard_normal((mesh.n_nodes, 3))
        assert abs(fem.mass_lumped_inner(w, Pu, phi) - fem.l2_inner(mesh, u, phi)) <= 1e-12
    assert np.max(np.abs(fem.riesz_lumped(w, w[:, None] * u) - u)) <= 1e-13
    with pytest.raises(ValueError):
        fem.riesz_lumped(np.zeros(3), np.ones((3, 3)))


def test_h1_seminorm_examples(rng):
    mesh = build_unit_cube_mesh(3)
    assert fem.h1_seminorm_sq(mesh, np.ones((mesh.n_nodes, 3))) == pytest.approx(0.0, abs=1e-24)
    assert math.isclose(fem.h1_seminorm_sq(mesh, mesh.vertices.copy()), 3.0, rel_tol=1e-12)
    # each element gradient reproduces differences along the element edges
    u = rng.standard_normal((mesh.n_nodes, 3))
    G = fem.element_gradients(mesh, u)
    p = mesh.vertices[mesh.tetrahedra]
    vals = u[mesh.tetrahedra]
    for j in range(1, 4):
        fd = vals[:, j] - vals[:, 0]
        pred = np.einsum("tcd,td->tc", G, p[:, j] - p[:, 0])
        assert np.max(np.abs(fd - pred)) <= 1e-10


@pytest.mark.parametrize("N", [1, 2, 3, 4])
def test_norm_equivalence_random(N):
    mesh = build_unit_cube_mesh(N)
    w = fem.lumped_weights(mesh)
    gen = np.random.default_rng(N)
    for _ in range(200):
        phi = gen.standard_normal((mesh.n_nodes, 3))
        r = fem.lumped_norm(w, phi) / fem.l2_norm(mesh, phi)
        assert 1.0 <= r <= math.sqrt(5) + 1e-12


@given(st.integers(1, 3), st.integers(0, 2**32 - 1))
def test_norm_equivalence_property(N, seed):
    mesh = build_unit_cube_mesh(N)
    phi = np.random.default_rng(seed).uniform(-1, 1, (mesh.n_nodes, 3))
    r = fem.lumped_norm(fem.lumped_weights(mesh), phi) / fem.l2_norm(mesh, phi)
    assert 1.0 - 1e-12 <= r <= math.sqrt(5) + 1e-12


def test_norm_equivalence_extremes():
    lo, hi = norm_ratio_bounds(build_unit_cube_mesh(2))
    assert lo >= 1.0 - 1e-12 and hi <= math.sqrt(5) + 1e-12


def test_inverse_estimate_constant_stable():
    c = [inverse_constant(build_unit_cube_mesh(N)) for N in (2, 4, 8)]
    assert max(c) / min(c) <= 1.1
    mesh = build_unit_cube_mesh(4)
    phi = np.random.default_rng(3).standard_normal((mesh.n_nodes, 3))
    assert math.sqrt(fem.h1_seminorm_sq(mesh, phi)) <= c[1] / mesh.h_max * fem.l2_norm(mesh, phi) * (1 + 1e-12)


def test_cross_matches_numpy(rng):
    u, v = rng.standard_normal((2, 10, 3))
    assert np.allclose(fem.cross(u, v), np.cross(u, v), rtol=0, atol=1e-15)
