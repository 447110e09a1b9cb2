import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vfpstab.grid import build_grid, d_dv, sq_norm
from vfpstab.operators import (CollisionSolver, DistributionState, coercivity_check,
                               collision_L, collision_matrix, density, dissipation,
                               hermite_functions, moments, project_pi)


@pytest.fixture(scope="module")
def g():
    return build_grid(8, 128, 8.0)


def _full(g, prof):
    return np.array(np.broadcast_to(prof, g.shape))


def test_projection_examples(g):
    sm = _full(g, g.sqrt_m)
    assert np.max(np.abs(project_pi(sm, g) - sm)) < 1e-10
    assert np.max(np.abs(project_pi(_full(g, g.v_nodes * g.sqrt_m), g))) < 1e-12


def test_projection_idempotent(g):
    h = np.random.default_rng(1).standard_normal(g.shape)
    p = project_pi(h, g)
    assert np.max(np.abs(project_pi(p, g) - p)) < 1e-12


def test_moments_examples(g):
    m = moments(DistributionState(_full(g, g.sqrt_m)), g)
    assert np.allclose(m.sigma, 1, atol=1e-10) and np.allclose(m.u, 0, atol=1e-10)
    m = moments(DistributionState(_full(g, g.v_nodes * g.sqrt_m)), g)
    assert np.allclose(m.sigma, 0, atol=1e-8) and np.allclose(m.u, 1, atol=1e-8)
    m = moments(np.zeros(g.shape), g)
    assert not m.sigma.any() and not m.u.any()


def test_collision_null_space_is_exact(g):
    assert np.max(np.abs(collision_L(_full(g, g.sqrt_m), g))) < 1e-4
    assert np.max(np.abs(collision_L(_full(g, g.sqrt_m), g))) < 1e-12


def test_collision_first_eigenfunction(g):
    h = _full(g, g.v_nodes * g.sqrt_m)
    err = np.max(np.abs(collision_L(h, g) + h))
    assert err < 0.02
    # O(dv^2): halving dv cuts the error by about four
    g2 = build_grid(8, 256, 8.0)
    h2 = _full(g2, g2.v_nodes * g2.sqrt_m)
    err2 = np.max(np.abs(collision_L(h2, g2) + h2))
    assert 3.5 < err / err2 < 4.5


def test_collision_of_zero(g):
    assert not collision_L(np.zeros(g.shape), g).any()


def test_collision_matrix_symmetric_nsd(g):
    L = collision_matrix(g)
    assert np.array_equal(L, L.T)
    ev = np.linalg.eigvalsh(L)
    assert ev.max() < 1e-12


def test_spectrum_matches_oscillator(g):
    ev = np.sort(np.linalg.eigvalsh(collision_matrix(g)))[::-1]
    assert abs(ev[0]) < 1e-6
    assert abs(ev[1] + 1) < 1e-2
    assert abs(ev[2] + 2) < 2e-2


def test_self_adjoint(g):
    rng = np.random.default_rng(3)
    a = rng.standard_normal(g.shape) * g.sqrt_m
    b = rng.standard_normal(g.shape) * g.sqrt_m
    assert abs(np.sum(collision_L(a, g) * b) - np.sum(a * collision_L(b, g))) < 1e-10 * np.sum(a * a)


def test_dissipation_equals_quadratic_form(g):
    h = np.random.default_rng(4).standard_normal(g.shape)
    qf = -np.sum(collision_L(h, g) * h) * g.dx * g.dv
    assert dissipation(h, g) == pytest.approx(qf, rel=1e-10)
    assert dissipation(h, g) >= 0


def test_hermite_functions_orthonormal(g):
    psi = hermite_functions(6, g.v_nodes)
    gram = psi @ psi.T * g.dv
    # truncation of the v^12 tail beyond vmax = 8 is ~1e-7
    assert np.allclose(gram, np.eye(7), atol=1e-6)


def test_coercivity_null_space(g):
    lhs, rhs1, rhs2 = coercivity_check(_full(g, g.sqrt_m), g)
    assert abs(lhs) < 1e-12 and abs(rhs1) < 1e-12


def test_first_form_fails_for_first_hermite_mode(g):
    # exact values: lhs = 1, rhs1 = (1 + 3/4 + 3)/4 = 1.1875, rhs2 = (3/4 + 3 - 1)/4
    h = _full(g, g.v_nodes * g.sqrt_m)
    lhs, rhs1, rhs2 = coercivity_check(h, g)
    grad = sq_norm(d_dv(h, g), g)
    assert abs(grad - 0.75) < 1e-2
    assert lhs == pytest.approx(1.0, abs=3e-3)
    assert rhs1 == pytest.approx(1.1875, abs=3e-3)
    assert lhs < rhs1
    assert lhs >= rhs2


def test_second_form_holds_for_hermite_mixtures(g):
    psi = hermite_functions(6, g.v_nodes)[1:]
    rng = np.random.default_rng(5)
    for _ in range(50):
        h = np.tile(rng.standard_normal(6) @ psi, (g.nx, 1))
        lhs, rhs1, rhs2 = coercivity_check(h, g)
        assert lhs >= rhs2 * (1 - 1e-3)


def test_first_form_holds_above_first_mode(g):
    # lhs / rhs1 = n / (0.625 n + 0.5625) > 1 for single modes n >= 2
    psi = hermite_functions(6, g.v_nodes)
    for n in range(2, 7):
        lhs, rhs1, _ = coercivity_check(_full(g, psi[n]), g)
        assert lhs >= rhs1 * (1 - 1e-3)
        assert lhs / rhs1 == pytest.approx(n / (0.625 * n + 0.5625), rel=2e-2)


def test_collision_solver_matches_dense(g):
    theta = 0.3
    A = np.eye(g.nv) - theta * collision_matrix(g)
    rhs = np.random.default_rng(6).standard_normal(g.shape)
    sol = CollisionSolver(g, theta).solve(rhs)
    assert np.allclose(sol @ A.T, rhs, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.floats(1e-4, 1e4))
def test_collision_solve_contracts(seed, theta):
    g = build_grid(4, 32, 8.0)
    rhs = np.random.default_rng(seed).standard_normal(g.shape)
    sol = CollisionSolver(g, theta).solve(rhs)
    assert np.linalg.norm(sol) <= np.linalg.norm(rhs) * (1 + 1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_orthogonal_decomposition(seed):
    g = build_grid(8, 32, 8.0)
    h = np.random.default_rng(seed).standard_normal(g.shape)
    p = project_pi(h, g)
    total = np.sum(h * h)
    assert abs(total - np.sum(p * p) - np.sum((h - p) ** 2)) < 1e-10 * max(total, 1)
    assert np.allclose(density(h - p, g), 0, atol=1e-12)


def test_state_validation():
    with pytest.raises(ValueError):
        DistributionState(np.zeros(4))
    with pytest.raises(ValueError):
        DistributionState(np.array([[np.inf]]))


def test_spectrum_is_fast():
    t0 = time.perf_counter()
    np.linalg.eigvalsh(collision_matrix(build_grid(8, 128, 8.0)))
    assert time.perf_counter() - t0 < 5
