import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spherical_chaos.mixture import MixtureSpec, require_valid, theta_eval, validate, xi_eval

coefs = st.floats(min_value=0.0, max_value=3.0, allow_nan=False)
mixtures = st.lists(st.tuples(st.integers(1, 4), coefs), min_size=0, max_size=3, unique_by=lambda t: t[0]).map(
    lambda terms: MixtureSpec(tuple(terms))
)
unit = st.floats(min_value=-0.999, max_value=0.999, allow_nan=False)


def test_two_spin_values():
    spec = MixtureSpec(((1, 0.25),))
    assert spec.xi(0.5) == pytest.approx(0.0625)
    assert spec.xi(0.5, 1) == pytest.approx(0.25)
    assert spec.xi(0.5, 2) == pytest.approx(0.5)
    assert spec.xi(0.5, 3) == 0.0


def test_mixed_values_against_direct_polynomial():
    spec = MixtureSpec(((1, 1.0), (2, 0.5)))
    x = 0.7
    assert spec.xi(x) == pytest.approx(x**2 + 0.5 * x**4, abs=1e-15)
    assert spec.xi(x, 1) == pytest.approx(2 * x + 2 * x**3, abs=1e-15)
    assert spec.xi(x, 2) == pytest.approx(2 + 6 * x**2, abs=1e-15)
    assert spec.xi(x, 3) == pytest.approx(12 * x, abs=1e-15)


def test_null_mixture_is_zero_everywhere():
    spec = MixtureSpec((), h=1.0)
    assert spec.is_null
    grid = np.linspace(-1, 1, 11)
    for order in range(4):
        assert np.all(spec.xi(grid, order) == 0.0)
    assert np.all(spec.theta(np.linspace(0, 1, 5)) == 0.0)


def test_scalar_and_array_paths_agree():
    spec = MixtureSpec(((1, 0.3), (2, 1.1), (3, 0.2)))
    grid = np.linspace(-1, 1, 41)
    for order in range(4):
        arr = spec.xi(grid, order)
        assert np.allclose(arr, [spec.xi(float(v), order) for v in grid], rtol=1e-14, atol=1e-14)


@settings(max_examples=60, deadline=None)
@given(mixtures, unit)
def test_derivatives_match_finite_differences(spec, x):
    h = 1e-5
    for order in range(3):
        fd = (spec.xi(x + h, order) - spec.xi(x - h, order)) / (2 * h)
        assert spec.xi(x, order + 1) == pytest.approx(fd, rel=1e-6, abs=1e-6)


@settings(max_examples=60, deadline=None)
@given(mixtures, unit)
def test_even_symmetry(spec, x):
    assert spec.xi(-x) == pytest.approx(spec.xi(x), abs=1e-14)
    assert spec.xi(-x, 1) == pytest.approx(-spec.xi(x, 1), abs=1e-14)


@settings(max_examples=60, deadline=None)
@given(mixtures, st.floats(min_value=0.0, max_value=0.999))
def test_theta_definition_and_derivative(spec, q):
    assert theta_eval(spec, q) == pytest.approx(q * spec.xi(q, 1) - spec.xi(q), abs=1e-12)
    h = 1e-6
    lo = max(q - h, 0.0)
    fd = (theta_eval(spec, q + h) - theta_eval(spec, lo)) / (q + h - lo)
    assert fd == pytest.approx(q * spec.xi(q, 2), rel=1e-4, abs=1e-5)


def test_theta_at_zero_vanishes():
    assert theta_eval(MixtureSpec(((1, 2.0), (3, 1.0))), 0.0) == 0.0


def test_out_of_range_and_bad_order_raise():
    spec = MixtureSpec(((1, 1.0),))
    with pytest.raises(ValueError):
        xi_eval(spec, 1.5)
    with pytest.raises(ValueError):
        xi_eval(spec, np.array([0.0, -1.2]))
    with pytest.raises(ValueError):
        xi_eval(spec, 0.5, order=4)


def test_validation_reports_problems():
    assert validate(MixtureSpec(((1, 1.0), (2, 0.5)))).valid
    report = validate(MixtureSpec(((1, 1.0), (1, 0.5), (0, 1.0), (2, -0.1))))
    assert not report.valid
    text = " ".join(report.problems)
    assert "duplicate" in text and "negative" in text and ">= 1" in text
    with pytest.raises(ValueError):
        require_valid(MixtureSpec(((2, float("nan")),)))


def test_round_trip_and_digest():
    spec = MixtureSpec(((2, 0.5), (1, 1.0)), h=0.3)
    again = MixtureSpec.from_dict(spec.to_dict())
    assert again == spec
    assert again.digest() == spec.digest()
    assert MixtureSpec(((1, 1.0), (2, 0.5)), h=0.3).digest() == spec.digest()
    assert MixtureSpec(((1, 1.0),), h=0.3).digest() != spec.digest()
