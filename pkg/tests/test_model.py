import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from midpoint_llg import fem
from midpoint_llg import model as mdl
from midpoint_llg.diagnostics import bilinear_constants, dmi_equivalence_gap
from midpoint_llg.mesh import build_unit_cube_mesh

from test_fem import QUAD_BARY


def random_spd(rng, n=3):
    B = rng.standard_normal((n, 3, 3))
    return B @ np.swapaxes(B, -1, -2) + np.eye(3)


def quad_aloc(mesh, A, J, psi, phi):
    """Element-by-element quadrature of sum_d (A_d(d_d psi - J_d psi), d_d phi - J_d phi)."""
    g = fem.barycentric_gradients(mesh)
    total = 0.0
    for t, (tet, vol) in enumerate(zip(mesh.tetrahedra, mesh.volumes)):
        Gp = psi[tet].T @ g[t]  # [c, d]
        Gf = phi[tet].T @ g[t]
        for lam in QUAD_BARY:
            pv, fv = lam @ psi[tet], lam @ phi[tet]
            for d in range(3):
                total += vol / 4 * (A[d] @ (Gp[:, d] - J[d] @ pv)) @ (Gf[:, d] - J[d] @ fv)
    return total


@pytest.fixture
def mesh2():
    return build_unit_cube_mesh(2)


def test_aloc_exchange_examples(mesh2):
    m = mdl.exchange_only()
    const = np.tile([0.2, -0.4, 1.0], (mesh2.n_nodes, 1))
    assert np.max(np.abs(mdl.aloc_apply(m, mesh2, const))) <= 1e-13
    x = mesh2.vertices.copy()
    assert math.isclose(mdl.aloc_eval(m, mesh2, x, x), 3.0, rel_tol=1e-12)


def test_aloc_matches_quadrature_oracle(mesh2, rng):
    A = random_spd(rng)
    J = rng.standard_normal((3, 3, 3))
    model = mdl.general_model(A, J)
    psi, phi = rng.standard_normal((2, mesh2.n_nodes, 3))
    exact = quad_aloc(mesh2, A, J, psi, phi)
    assert abs(mdl.aloc_eval(model, mesh2, psi, phi) - exact) <= 1e-12 * max(1.0, abs(exact))


def test_aloc_piecewise_constant_coefficients(rng):
    mesh = build_unit_cube_mesh(1)
    A = np.stack([random_spd(rng) for _ in range(mesh.n_tets)])
    J = rng.standard_normal((mesh.n_tets, 3, 3, 3))
    model = mdl.general_model(A, J)
    psi, phi = rng.standard_normal((2, mesh.n_nodes, 3))
    total = 0.0
    for t in range(mesh.n_tets):
        one = mdl.general_model(A[t], J[t])
        sub = type(mesh)(mesh.vertices.copy(), mesh.tetrahedra[t:t + 1].copy(), mesh.volumes[t:t + 1].copy(),
                         mesh.box, 1)
        total += mdl.aloc_eval(one, sub, psi, phi)
    assert math.isclose(mdl.aloc_eval(model, mesh, psi, phi), total, rel_tol=1e-12)


def test_a_eval_examples(mesh2, rng):
    ex = mdl.exchange_only()
    psi, phi = rng.standard_normal((2, mesh2.n_nodes, 3))
    assert mdl.a_eval(ex, mesh2, psi, phi) == pytest.approx(mdl.aloc_eval(ex, mesh2, psi, phi), abs=1e-13)
    c, u = 0.7, np.array([1.0, -2.0, 0.5])
    scaled = mdl.general_model(ex.A, ex.J, pi=mdl.ScalingPi(c))
    U = np.tile(u, (mesh2.n_nodes, 1))
    assert mdl.a_eval(scaled, mesh2, U, U) == pytest.approx(-c * u @ u, abs=1e-12)


def test_a_symmetric_for_dmi(mesh2, rng):
    model = mdl.exchange_dmi(1.2, 0.9)
    for _ in range(50):
        psi, phi = rng.standard_normal((2, mesh2.n_nodes, 3))
        a, b = mdl.a_eval(model, mesh2, psi, phi), mdl.a_eval(model, mesh2, phi, psi)
        assert abs(a - b) <= 1e-12 * max(1.0, abs(a))


def test_pi_examples(mesh2, rng):
    m = rng.standard_normal((mesh2.n_nodes, 3))
    ex = mdl.exchange_only()
    assert np.array_equal(mdl.pi_apply(ex, mesh2, m), np.zeros_like(m))
    two = mdl.general_model(ex.A, ex.J, pi=mdl.ScalingPi(2.0))
    assert np.array_equal(mdl.pi_apply(two, mesh2, m), 2 * m)
    uni = mdl.general_model(ex.A, ex.J, pi=mdl.UniaxialAnisotropy(1.0, (0, 0, 1)))
    d = np.tile(np.ones(3) / math.sqrt(3), (mesh2.n_nodes, 1))
    assert np.allclose(mdl.pi_apply(uni, mesh2, d), [0, 0, 1 / math.sqrt(3)], rtol=0, atol=1e-16)
    with pytest.raises(ValueError):
        mdl.UniaxialAnisotropy(1.0, (0, 0, 0))


def test_imex_examples(mesh2, rng):
    model = mdl.general_model(mdl.exchange_only().A, np.zeros((3, 3, 3)), pi=mdl.ScalingPi(1.5))
    m = rng.standard_normal((mesh2.n_nodes, 3))
    assert np.allclose(mdl.imex_extrapolate(model, mesh2, m, m), mdl.pi_apply(model, mesh2, m), rtol=0, atol=1e-15)
    assert np.allclose(mdl.imex_extrapolate(model, mesh2, m, 0 * m), 1.5 * mdl.pi_apply(model, mesh2, m))


def test_energy_examples(mesh2):
    ex = mdl.exchange_only()
    const = np.tile([0.0, 0.6, 0.8], (mesh2.n_nodes, 1))
    assert mdl.energy(ex, mesh2, const) == pytest.approx(0.0, abs=1e-14)
    assert math.isclose(mdl.energy(ex, mesh2, mesh2.vertices.copy()), 1.5, rel_tol=1e-12)
    dmi = mdl.exchange_dmi(1.3, 0.7)
    assert mdl.energy(dmi, mesh2, const) == pytest.approx(0.0, abs=1e-14)
    assert mdl.dmi_curl_form(mesh2, 1.3, 0.7, const, const) == pytest.approx(0.0, abs=1e-14)


def test_energy_relation(mesh2, rng):
    base = mdl.exchange_dmi(1.0, 0.4)
    model = mdl.general_model(base.A, base.J, pi=mdl.UniaxialAnisotropy(0.8, (1, 1, 0)),
                              f=rng.standard_normal((mesh2.n_nodes, 3)))
    m = rng.standard_normal((mesh2.n_nodes, 3))
    rel = mdl.energy_loc(model, mesh2, m) - 0.5 * fem.l2_inner(mesh2, mdl.pi_apply(model, mesh2, m), m)
    assert abs(mdl.energy(model, mesh2, m) - rel) <= 1e-13 * max(1.0, abs(rel))


def test_heffloc_examples(mesh2, rng):
    w = fem.lumped_weights(mesh2)
    ex = mdl.exchange_only()
    const = np.tile([1.0, 0, 0], (mesh2.n_nodes, 1))
    assert np.max(np.abs(mdl.heffloc_field(ex, mesh2, w, const))) <= 1e-13
    f = rng.standard_normal((mesh2.n_nodes, 3))
    src = mdl.general_model(ex.A, ex.J, f=f)
    expect = fem.riesz_lumped(w, fem.l2_action(mesh2, f))
    assert np.allclose(mdl.heffloc_field(src, mesh2, w, const), expect, rtol=0, atol=1e-12)
    assert np.max(np.abs(mdl.heffloc_field(src, mesh2, w, const, include_f=False))) <= 1e-13
    dmi = mdl.exchange_dmi(1.0, 0.5)
    m = rng.standard_normal((mesh2.n_nodes, 3))
    H = mdl.heffloc_field(dmi, mesh2, w, m)
    for _ in range(20):
        phi = rng.standard_normal((mesh2.n_nodes, 3))
        assert abs(fem.mass_lumped_inner(w, H, phi) + mdl.aloc_eval(dmi, mesh2, m, phi)) <= 1e-12


def test_curl_form_rotation_field():
    mesh = build_unit_cube_mesh(3)
    x = mesh.vertices
    psi = np.stack([-x[:, 1], x[:, 0], np.zeros(len(x))], axis=1)
    for lex, ldm in ((1.0, 0.3), (0.5, 2.0)):
        assert math.isclose(mdl.dmi_curl_form(mesh, lex, ldm, psi, psi), -2 * lex**2, rel_tol=1e-12)


def test_dmi_general_form_equals_curl_pairing(mesh2, rng):
    res = dmi_equivalence_gap(mesh2, 1.3, 0.7, False, 50, rng)
    assert res["max_rel"] <= 1e-12


def test_literal_dmi_scaling_leaves_zeroth_order_gap(mesh2, rng):
    lex, ldm = 1.3, 0.7
    res = dmi_equivalence_gap(mesh2, lex, ldm, True, 20, rng)
    assert np.allclose(res["gap_over_l2"], (ldm**2 - ldm) / (2 * lex**2), rtol=1e-10, atol=0)


def test_completed_square_examples(rng):
    A = random_spd(rng)
    s, xi = rng.standard_normal(3), rng.standard_normal((3, 3))
    lhs, rhs = mdl.completed_square_identity(A, np.zeros((3, 3, 3)), s, xi)
    expect = 0.5 * sum(A[d] @ xi[d] @ xi[d] for d in range(3))
    assert lhs == pytest.approx(expect) and rhs == pytest.approx(expect)
    C = rng.standard_normal((3, 3, 3))
    K = C - np.swapaxes(C, -1, -2)
    xi_min = np.stack([np.linalg.solve(A[d], K[d] @ s) for d in range(3)])
    lhs, rhs = mdl.completed_square_identity(A, K, s, xi_min)
    floor = 0.5 * sum((K[d] @ np.linalg.solve(A[d], K[d] @ s)) @ s for d in range(3))
    assert lhs == pytest.approx(floor, abs=1e-12) and rhs == pytest.approx(floor, abs=1e-12)
    with pytest.raises(ValueError, match="singular"):
        mdl.completed_square_identity(np.zeros((3, 3, 3)), K, s, xi)


@given(st.integers(0, 2**32 - 1))
def test_completed_square_property(seed):
    gen = np.random.default_rng(seed)
    A = random_spd(gen)
    C = gen.standard_normal((3, 3, 3))
    lhs, rhs = mdl.completed_square_identity(A, C - np.swapaxes(C, -1, -2), gen.standard_normal(3),
                                             gen.standard_normal((3, 3)))
    assert abs(lhs - rhs) <= 1e-13 * (1 + abs(lhs))


@pytest.mark.parametrize("pi", [mdl.ZeroPi(), mdl.ScalingPi(-0.4), mdl.UniaxialAnisotropy(2.0, (1, 2, 3))])
def test_pi_self_adjoint(mesh2, rng, pi):
    model = mdl.general_model(mdl.exchange_only().A, np.zeros((3, 3, 3)), pi=pi)
    for _ in range(50):
        u, v = rng.standard_normal((2, mesh2.n_nodes, 3))
        lhs = fem.l2_inner(mesh2, mdl.pi_apply(model, mesh2, u), v)
        rhs = fem.l2_inner(mesh2, u, mdl.pi_apply(model, mesh2, v))
        assert abs(lhs - rhs) <= 1e-12


def test_gateaux_derivative(mesh2, rng):
    base = mdl.exchange_dmi(1.1, 0.6)
    model = mdl.general_model(base.A, base.J, pi=mdl.ScalingPi(0.3), f=rng.standard_normal((mesh2.n_nodes, 3)))
    delta = 1e-5
    for _ in range(20):
        m, phi = rng.standard_normal((2, mesh2.n_nodes, 3))
        fd = (mdl.energy(model, mesh2, m + delta * phi) - mdl.energy(model, mesh2, m - delta * phi)) / (2 * delta)
        exact = mdl.a_eval(model, mesh2, m, phi) - fem.l2_inner(mesh2, model.source(mesh2), phi)
        assert abs(fd - exact) <= 1e-7


def test_garding_and_continuity_constants_stable():
    model = mdl.exchange_dmi(1.0, 0.8)
    consts = [bilinear_constants(model, build_unit_cube_mesh(N)) for N in (2, 3, 4)]
    assert all(c["C2"] > 0 for c in consts)
    c1 = [c["C1"] for c in consts]
    c3 = [c["C3"] for c in consts]
    assert max(c1) / min(c1) <= 1.2 and max(c3) / min(c3) <= 1.2
    # the inequality itself on random fields
    mesh = build_unit_cube_mesh(3)
    c = consts[1]
    gen = np.random.default_rng(0)
    for _ in range(20):
        psi = gen.standard_normal((mesh.n_nodes, 3))
        h1 = fem.h1_seminorm_sq(mesh, psi) + fem.l2_norm(mesh, psi) ** 2
        a = mdl.aloc_eval(model, mesh, psi, psi)
        assert a >= c["C2"] * h1 - c["C3"] * fem.l2_norm(mesh, psi) ** 2 - 1e-10
        assert abs(a) <= c["C1"] * h1 * (1 + 1e-10)


def test_model_validation():
    A = np.stack([np.eye(3)] * 3)
    bad = A.copy()
    bad[0, 0, 1] = 1e-10
    with pytest.raises(ValueError, match="symmetric"):
        mdl.general_model(bad, np.zeros((3, 3, 3)))
    with pytest.raises(ValueError, match="positive definite"):
        mdl.general_model(-A, np.zeros((3, 3, 3)))
    with pytest.raises(ValueError, match="alpha"):
        mdl.general_model(A, np.zeros((3, 3, 3)), alpha=0.0)
    assert mdl.exchange_only(lex=2.0).A0 == pytest.approx(4.0)
