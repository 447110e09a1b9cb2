import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from vfpstab.boundary import (FeedbackMatrix, Theorem, boundary_functionals,
                              check_constraints, compute_cb, derivative_bc_residual,
                              evaluate_I, flux_balance, incoming_values, traces)
from vfpstab.grid import build_grid
from vfpstab.kinetic import SimConfig, simulate


@pytest.fixture(scope="module")
def g():
    return build_grid(16, 32, 8.0)


def test_periodic_incoming_copies_opposite_wall(g):
    h = np.random.default_rng(0).standard_normal(g.shape)
    in_left, in_right = incoming_values(h, FeedbackMatrix.periodic())
    assert np.array_equal(in_left[g.positive], h[-1, g.positive])
    assert np.array_equal(in_right[g.negative], h[0, g.negative])


def test_reflective_incoming_mirrors_velocity(g):
    h = np.random.default_rng(1).standard_normal(g.shape)
    in_left, _ = incoming_values(h, FeedbackMatrix.reflective())
    assert np.array_equal(in_left[g.positive], h[0, g.mirror][g.positive])


def test_mixed_feedback_value(g):
    h = np.zeros(g.shape)
    h[0, g.negative] = 2.0
    h[-1, g.positive] = 4.0
    in_left, _ = incoming_values(h, FeedbackMatrix(0.5, 0.5, 0.5, 0.5))
    assert np.allclose(in_left[g.positive], 3.0)


def test_functionals_zero(g):
    bf = boundary_functionals(np.zeros(g.shape), g)
    assert (bf.A, bf.B, bf.A_x, bf.B_x) == (0, 0, 0, 0)


def test_functional_A_half_moment():
    # midpoint quadrature of v M on the half line is second order in dv
    exact = 1 / (2 * math.sqrt(2 * math.pi))
    errs = []
    for nv in (128, 256, 512):
        g = build_grid(16, nv, 8.0)
        errs.append(abs(boundary_functionals(np.broadcast_to(g.sqrt_m, g.shape), g).A - exact))
    assert errs[0] < 2e-4
    assert 3.9 < errs[0] / errs[1] < 4.1 and 3.9 < errs[1] / errs[2] < 4.1


def test_functionals_quadratic(g):
    h = np.random.default_rng(2).standard_normal(g.shape)
    b1, b2 = boundary_functionals(h, g), boundary_functionals(2 * h, g)
    for k in ("A", "B", "A_x", "B_x"):
        assert getattr(b2, k) == pytest.approx(4 * getattr(b1, k), rel=1e-13)


def test_cb_examples():
    assert compute_cb(1, 1, 1, 1) == 0
    assert compute_cb(1, 0, 1, 0) == 1
    assert math.isnan(compute_cb(0, 0, 0, 0))
    with pytest.raises(ValueError):
        compute_cb(-1, 0, 0, 0)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0, 1e3), min_size=4, max_size=4), st.floats(1e-3, 1e3))
def test_cb_scale_invariant(vals, c):
    base = compute_cb(*vals)
    assume(not math.isnan(base))
    assert compute_cb(*(c * v for v in vals)) == pytest.approx(base, rel=1e-9, abs=1e-12)


def test_I_examples():
    for vals in [(1, 2, 3, 4), (0.3, 0, 5, 1e-3)]:
        assert evaluate_I(FeedbackMatrix.periodic(), *vals, a=0.05) == 0
    assert evaluate_I(FeedbackMatrix.symmetric(0.5), 1, 0, 1, 0, 0.1) == pytest.approx(-0.9, abs=1e-15)


@settings(max_examples=200, deadline=None)
@given(st.floats(0.01, 0.99), st.lists(st.floats(0, 10), min_size=4, max_size=4),
       st.floats(0, 1))
def test_I_nonpositive_when_a_below_cb(k, vals, frac):
    cb = compute_cb(*vals)
    assume(not math.isnan(cb) and cb > 0)
    assert evaluate_I(FeedbackMatrix.symmetric(k), *vals, a=frac * cb) <= 1e-12 * (1 + sum(vals))


def test_flux_balance_row_sums_one(g):
    rng = np.random.default_rng(3)
    for _ in range(20):
        k00, k11 = rng.uniform(-1, 2, 2)
        K = FeedbackMatrix(k00, 1 - k00, 1 - k11, k11)
        assert flux_balance(rng.standard_normal(g.shape), K, g) < 1e-12


def test_flux_balance_detects_bad_row_sum(g):
    h = np.zeros(g.shape)
    h[0, g.negative] = 1.0
    assert flux_balance(h, FeedbackMatrix(0.6, 0.6, 0.5, 0.5), g) > 1e-3
    assert flux_balance(np.zeros(g.shape), FeedbackMatrix(0.6, 0.6, 0.5, 0.5), g) == 0


def test_derivative_residual_x_constant(g):
    h = np.tile(np.random.default_rng(4).standard_normal(g.nv), (g.nx, 1))
    assert derivative_bc_residual(h, FeedbackMatrix(0.3, 0.7, 0.2, 0.8), g) < 1e-12 * g.nx


def test_derivative_residual_periodic_profile():
    # quadratic in x: the three-point one-sided stencil is exact, so a profile
    # that is symmetric about x = 1/2 has matching slopes up to sign
    g = build_grid(32, 32, 8.0)
    x = g.x_nodes[:, None]
    h = ((x - 0.5) ** 2) * g.sqrt_m
    dl, dr = (2 * (0 - 0.5)) * g.sqrt_m, (2 * (1 - 0.5)) * g.sqrt_m
    from vfpstab.boundary import boundary_dx
    bl, br = boundary_dx(h, g)
    assert np.allclose(bl, dl, atol=1e-12) and np.allclose(br, dr, atol=1e-12)
    # sin(2 pi x) is odd about x = 1/2, so the mirrored stencils agree exactly
    hp = np.sin(2 * np.pi * x) * g.sqrt_m
    assert derivative_bc_residual(hp, FeedbackMatrix.periodic(), g) < 1e-10


def test_derivative_residual_converges_for_generic_periodic_profile():
    res = []
    for nx in (32, 64, 128):
        g = build_grid(nx, 16, 8.0)
        x = g.x_nodes[:, None]
        h = (np.cos(2 * np.pi * x) + 0.3 * np.sin(4 * np.pi * x) + 0.2 * np.cos(6 * np.pi * x)) * g.sqrt_m
        res.append(derivative_bc_residual(h, FeedbackMatrix.periodic(), g))
    assert res[0] / res[1] > 3.5 and res[1] / res[2] > 3.5


def test_derivative_residual_refines_along_a_run():
    res = []
    for nx in (32, 64, 128):
        cfg = SimConfig(nx=nx, nv=32, epsilon=1.0, t_end=0.05, output_every=10 ** 6)
        cfg.initial.family = "odd-flux"
        r = simulate(cfg)
        res.append(derivative_bc_residual(r.state, cfg.K, r.grid))
    assert res[0] > res[1] > res[2]


def test_constraints_periodic():
    rep = check_constraints(FeedbackMatrix.periodic(), a=0.05)
    assert rep.const1_residuals == (0, 0)
    assert rep.const1_pass and rep.const2_pass and rep.constraint3_pass
    assert rep.theorem_selected is Theorem.PERIODIC_LARGE_FIELD


def test_constraints_reflective_limit():
    rep = check_constraints(FeedbackMatrix.reflective(), a=0.05)
    assert rep.const1_residuals == (0, 4)
    assert not rep.const1_pass


def test_constraints_half_feedback():
    rep = check_constraints(FeedbackMatrix.symmetric(0.5), a=0.05)
    assert rep.const2_pass
    assert rep.const1_residuals[1] == pytest.approx(2.25 - 0.25)
    assert not rep.const1_pass
    assert rep.theorem_selected is Theorem.SMALL_FIELD


def test_constraints_profile_violation():
    rep = check_constraints(FeedbackMatrix(1.5, -0.5, -0.5, 1.5), a=0.05)
    assert rep.theorem_selected is Theorem.NONE
    assert any("k00 = 1.5 not in [0,1]" in r for r in rep.reasons)


def test_constraints_small_field_with_trajectory_extremes():
    K = FeedbackMatrix.symmetric(0.5)
    assert check_constraints(K, a=0.05, C_B_min=0.1).theorem_selected is Theorem.SMALL_FIELD
    assert check_constraints(K, a=0.05, C_B_min=0.01).theorem_selected is Theorem.NONE
    rep = check_constraints(K, a=0.05, C_B_min=0.1, I_max=0.5)
    assert rep.const3_pass is False


def test_constraints_epsilon_zero():
    assert check_constraints(FeedbackMatrix.periodic(), 0.05, epsilon=0.0).theorem_selected \
        is Theorem.EPSILON_ZERO
    assert check_constraints(FeedbackMatrix.symmetric(0.5), 0.05, epsilon=0.0).theorem_selected \
        is Theorem.NONE


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.floats(-3, 3))
def test_incoming_values_linear(seed, c):
    g = build_grid(8, 16, 8.0)
    h = np.random.default_rng(seed).standard_normal(g.shape)
    K = FeedbackMatrix(0.2, 0.8, 0.4, 0.6)
    a = incoming_values(h, K)
    b = incoming_values(c * h, K)
    assert np.allclose(b[0], c * a[0]) and np.allclose(b[1], c * a[1])
    tr = traces(h, K)
    assert np.array_equal(tr.left[g.negative], h[0, g.negative])
