import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from spherical_chaos.errors import AdmissibilityError
from spherical_chaos.mixture import MixtureSpec
from spherical_chaos.order_param import (
    Envelope,
    StepOrderParameter,
    d_eval,
    insert_breakpoint,
    log_integral,
    support_min,
    weighted_integral,
)

SPEC = MixtureSpec(((1, 0.8), (2, 0.6)))


@st.composite
def step_functions(draw, max_k=3):
    k = draw(st.integers(0, max_k))
    q = sorted(draw(st.lists(st.floats(0.01, 0.99), min_size=k, max_size=k)))
    m = sorted(draw(st.lists(st.floats(0.0, 1.0), min_size=k + 1, max_size=k + 1)))
    return StepOrderParameter((0.0, *q), tuple(m))


def quad_pieces(func, x, lo=0.0, hi=1.0):
    points = [p for p in x.q if lo < p < hi]
    return quad(func, lo, hi, points=points or None, limit=200, epsabs=1e-13, epsrel=1e-13)[0]


def test_evaluation_and_constructors():
    x = StepOrderParameter((0.0, 0.3, 0.6), (0.1, 0.4, 0.9))
    assert x(0.0) == 0.1 and x(0.29) == 0.1 and x(0.3) == 0.4 and x(0.99) == 0.9 and x(1.0) == 1.0
    assert np.allclose(x(np.array([0.1, 0.5, 0.7])), [0.1, 0.4, 0.9])
    assert StepOrderParameter.constant(1.0).pairs == [(0.0, 1.0)]
    assert StepOrderParameter.step_at(0.4).pairs == [(0.0, 0.0), (0.4, 1.0)]
    assert StepOrderParameter.from_pairs([(0, 0.2), (0.5, 1)]).k == 1


@pytest.mark.parametrize(
    "q, m",
    [((0.1,), (0.5,)), ((0.0, 0.5, 0.4), (0.1, 0.2, 0.3)), ((0.0, 0.5), (0.6, 0.2)), ((0.0,), (1.5,)), ((0.0, 0.5), (0.1,))],
)
def test_invalid_step_functions(q, m):
    with pytest.raises(ValueError):
        StepOrderParameter(q, m)


@settings(max_examples=40, deadline=None)
@given(step_functions(), st.floats(0.0, 1.0))
def test_d_matches_quadrature(x, q):
    expected = quad_pieces(lambda s: SPEC.xi(s, 2) * x(s), x, q, 1.0) if q < 1.0 else 0.0
    assert d_eval(x, SPEC, q) == pytest.approx(expected, abs=1e-11)


@settings(max_examples=40, deadline=None)
@given(step_functions())
def test_weighted_integral_matches_quadrature(x):
    expected = quad_pieces(lambda s: s * SPEC.xi(s, 2) * x(s), x)
    assert weighted_integral(x, SPEC) == pytest.approx(expected, abs=1e-11)


@settings(max_examples=40, deadline=None)
@given(
    step_functions(),
    st.floats(-0.5, 0.5),
    st.floats(0.0, 1.0),
    st.floats(0.0, 1.0),
    st.floats(0.05, 0.95),
    st.booleans(),
)
def test_log_integral_matches_quadrature(x, shift, a, c, t, shrink):
    lo, hi = sorted((a, c))
    env = Envelope.phi(t, lo) if shrink else None
    b = d_eval(x, SPEC, 0.0) + abs(shift) + 0.3
    e = env or Envelope()

    def integrand(s):
        return SPEC.xi(s, 2) / (b - shift - e(x, SPEC, s))

    expected = quad_pieces(integrand, x, lo, hi) if hi > lo else 0.0
    assert log_integral(x, SPEC, b, shift, lo, hi, env) == pytest.approx(expected, rel=1e-10, abs=1e-11)


def test_log_integral_with_zero_level_is_rational():
    # x = 0 on [0, 1): the integrand has constant denominator b - d(0)
    x = StepOrderParameter((0.0,), (0.0,))
    assert log_integral(x, SPEC, 2.0, 0.0, 0.0, 1.0) == pytest.approx(SPEC.xi(1.0, 1) / 2.0)


def test_admissibility_error_reports_location():
    x = StepOrderParameter((0.0, 0.5), (0.2, 1.0))
    d0 = d_eval(x, SPEC, 0.0)
    with pytest.raises(AdmissibilityError) as info:
        log_integral(x, SPEC, d0 * 0.9, 0.0, 0.0, 1.0)
    assert info.value.location == 0.0
    with pytest.raises(ValueError):
        log_integral(x, SPEC, 5.0, 0.0, 0.6, 0.2)


def test_d_at_one_and_monotonicity():
    x = StepOrderParameter((0.0, 0.2, 0.7), (0.0, 0.5, 0.8))
    grid = np.linspace(0.0, 1.0, 101)
    values = d_eval(x, SPEC, grid)
    assert values[-1] == pytest.approx(0.0, abs=1e-15)
    assert np.all(np.diff(values) <= 1e-15)


def test_support_min():
    assert support_min(StepOrderParameter((0.0, 0.3), (0.0, 1.0))) == 0.3
    assert support_min(StepOrderParameter((0.0,), (0.2,))) == 0.0
    assert support_min(StepOrderParameter((0.0,), (0.0,))) == 1.0


@settings(max_examples=40, deadline=None)
@given(step_functions(), st.floats(0.0, 1.0))
def test_insert_breakpoint_preserves_function_and_integrals(x, q):
    y = insert_breakpoint(x, q)
    assert q in y.q or q == 1.0
    grid = np.linspace(0, 1, 57)
    assert np.array_equal(x(grid), y(grid))
    assert insert_breakpoint(y, q) == y
    assert weighted_integral(y, SPEC) == pytest.approx(weighted_integral(x, SPEC), abs=1e-14)
    b = d_eval(x, SPEC, 0.0) + 0.5
    assert log_integral(y, SPEC, b, 0.1, 0.0, 1.0) == pytest.approx(log_integral(x, SPEC, b, 0.1, 0.0, 1.0), abs=1e-13)
