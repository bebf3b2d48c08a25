import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spherical_chaos.chaos import (
    ChaosPoint,
    chaos_gap,
    coupled_value,
    f_eval,
    golden_section,
    lambda_curvature,
    solve_u_star,
)
from spherical_chaos.cs_functional import cs_value
from spherical_chaos.errors import AdmissibilityError, PreconditionError
from spherical_chaos.mixture import MixtureSpec
from spherical_chaos.order_param import StepOrderParameter, d_eval

SPEC = MixtureSpec(((1, 1.0), (2, 0.4)), h=0.3)
X = StepOrderParameter((0.0, 0.2, 0.5), (0.0, 0.4, 0.8))
B = 4.0


def test_point_validation():
    with pytest.raises(ValueError):
        ChaosPoint(0.0, 0.1, 0.0, 2.0)
    with pytest.raises(ValueError):
        ChaosPoint(0.5, 1.2, 0.0, 2.0)
    assert ChaosPoint(0.5, -0.2, 0.0, 2.0).eta == -1
    assert ChaosPoint(0.5, 0.0, 0.0, 2.0).eta == 1


# X vanishes on [0, 0.2), so both identities hold for |u| <= 0.2
U_X = 0.2


@settings(max_examples=40, deadline=None)
@given(st.floats(-U_X, U_X), st.floats(0.05, 0.95))
def test_coupling_identity_at_zero_multiplier(u, t):
    assert coupled_value(SPEC, X, ChaosPoint(t, u, 0.0, B)) == pytest.approx(2 * cs_value(SPEC, X, B), abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.floats(-U_X, U_X), st.floats(0.05, 0.95))
def test_multiplier_derivative_is_f(u, t):
    step = 1e-5
    hi = coupled_value(SPEC, X, ChaosPoint(t, u, step, B))
    lo = coupled_value(SPEC, X, ChaosPoint(t, u, -step, B))
    assert (hi - lo) / (2 * step) == pytest.approx(f_eval(SPEC, X, B, t, u), abs=1e-7)


@settings(max_examples=20, deadline=None)
@given(st.floats(-1.0, 1.0), st.floats(0.05, 0.95))
def test_convex_in_multiplier(u, t):
    half = 0.5 * (B - d_eval(X, SPEC, 0.0))
    lams = np.linspace(-half, half, 41)
    vals = np.array([coupled_value(SPEC, X, ChaosPoint(t, u, lam, B)) for lam in lams])
    assert np.all(np.diff(vals, 2) >= -1e-10)


def test_multiplier_outside_domain_raises():
    bad = B - d_eval(X, SPEC, 0.0) + 0.1
    with pytest.raises(AdmissibilityError):
        coupled_value(SPEC, X, ChaosPoint(0.5, 0.3, bad, B))


def test_golden_section_brackets_minimum():
    arg, val = golden_section(lambda v: abs(v - 0.3) + 1.0, -1.0, 2.0, tol=1e-10)
    assert arg == pytest.approx(0.3, abs=1e-10)
    assert val == pytest.approx(1.0, abs=1e-10)
    arg, _ = golden_section(lambda v: (v + 0.7) ** 2, -1.0, 2.0, tol=1e-10)
    assert arg == pytest.approx(-0.7, abs=1e-7)


def test_u_star_is_zero_without_field(two_spin_optimum):
    spec, opt = two_spin_optimum
    assert solve_u_star(spec, opt.x_star, opt.b_star, 0.5) == 0.0


def test_u_star_root_with_field(two_spin_field_optimum):
    spec, opt = two_spin_field_optimum
    u = solve_u_star(spec, opt.x_star, opt.b_star, 0.5)
    assert 0.0 < u < opt.u_x
    assert abs(f_eval(spec, opt.x_star, opt.b_star, 0.5, u)) < 1e-12
    # more correlated disorder moves the centre toward the top of the support
    assert solve_u_star(spec, opt.x_star, opt.b_star, 0.9) > u


def test_u_star_rejects_non_optimiser():
    spec = MixtureSpec(((1, 1.0),), h=0.5)
    x = StepOrderParameter((0.0, 0.05), (0.0, 1.0))
    with pytest.raises(PreconditionError):
        solve_u_star(spec, x, 3.0, 0.5)


def test_gap_vanishes_at_u_star_and_is_positive_elsewhere(two_spin_field_optimum):
    spec, opt = two_spin_field_optimum
    t = 0.5
    u_star = solve_u_star(spec, opt.x_star, opt.b_star, t)
    gap, lam = chaos_gap(spec, opt.x_star, opt.b_star, t, u_star)
    assert abs(gap) <= 1e-9 and lam == 0.0
    for u in (-0.6, -0.1, u_star + 0.1, 0.8):
        assert chaos_gap(spec, opt.x_star, opt.b_star, t, u)[0] > 0.0


def test_gap_matches_brute_force_multiplier_grid(two_spin_field_optimum):
    spec, opt = two_spin_field_optimum
    t, u = 0.5, 0.5
    x, b = opt.x_star, opt.b_star
    gap, lam = chaos_gap(spec, x, b, t, u)
    half = b - d_eval(x, spec, 0.0) - 1e-6
    grid = np.linspace(-half, half, 20001)
    vals = np.array([coupled_value(spec, x, ChaosPoint(t, u, v, b)) for v in grid])
    i = int(np.argmin(vals))
    fine = np.linspace(grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)], 2001)
    best = min(coupled_value(spec, x, ChaosPoint(t, u, v, b)) for v in fine)
    assert gap == pytest.approx(2 * cs_value(spec, x, b) - best, abs=1e-7)


def test_gap_refuses_identical_disorder(two_spin_optimum):
    spec, opt = two_spin_optimum
    with pytest.raises(ValueError):
        chaos_gap(spec, opt.x_star, opt.b_star, 1.0, 0.2)


def test_curvature_bound_is_finite():
    assert 0.0 < lambda_curvature(SPEC, X, B, 0.5, 0.3, n=11) < np.inf
