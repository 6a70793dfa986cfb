import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from combdrive.errors import ConvergenceError, IntegrationError, RangeError
from combdrive.numerics import composite_gauss, find_root, gauss_legendre, gauss_rule, integrate_ivp, quad_regularized


@pytest.mark.parametrize("n", [1, 2, 5, 16])
def test_gauss_rule_exact_for_polynomials(n):
    x, w = gauss_legendre(n)
    assert w.sum() == pytest.approx(2.0, rel=1e-14)
    for k in range(2 * n):
        exact = (1.0 - (-1.0) ** (k + 1)) / (k + 1)
        assert np.dot(w, x**k) == pytest.approx(exact, abs=1e-13)


def test_composite_gauss_matches_single_rule():
    g = np.exp
    assert composite_gauss(g, np.linspace(0, 1, 5), 8) == pytest.approx(math.e - 1, rel=1e-15)
    assert gauss_rule(g, 0.0, 1.0, 16) == pytest.approx(math.e - 1, rel=1e-15)


def test_quad_regularized_default_interval_and_breakpoints():
    assert quad_regularized(np.sin) == pytest.approx(1.0, rel=1e-14)
    # kink at 0.3 resolved by a breakpoint
    f = lambda t: np.abs(t - 0.3)
    assert quad_regularized(f, a=0.0, b=1.0, breakpoints=[0.3]) == pytest.approx(0.045 + 0.245, rel=1e-14)
    # reversed limits flip the sign
    assert quad_regularized(np.cos, a=1.0, b=0.0) == pytest.approx(-math.sin(1.0), rel=1e-14)


def test_quad_regularized_reports_nonconvergence():
    with pytest.raises(ConvergenceError):
        quad_regularized(lambda t: 1.0 / np.sqrt(t), tol=1e-15, max_doublings=2)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.1, 3.0))
def test_find_root_on_cubic(c):
    f = lambda x: x**3 - c
    r = find_root(f, 0.0, 2.0, tol=1e-15, fprime=lambda x: 3 * x * x)
    assert r == pytest.approx(c ** (1 / 3), rel=1e-14)


def test_find_root_rejects_bad_bracket():
    with pytest.raises(RangeError):
        find_root(lambda x: x * x + 1, -1, 1)


def test_integrate_ivp_harmonic_oscillator_both_directions():
    field = lambda t, y: [y[1], -y[0]]
    fwd = integrate_ivp(field, [1.0, 0.0], (0.0, 2 * math.pi), rel_tol=1e-13, abs_tol=1e-15)
    np.testing.assert_allclose(fwd.final, [1.0, 0.0], atol=1e-11)
    np.testing.assert_allclose(fwd(1.0), [math.cos(1.0), -math.sin(1.0)], atol=1e-11)
    back = integrate_ivp(field, [1.0, 0.0], (0.0, -1.0), rel_tol=1e-13, abs_tol=1e-15)
    np.testing.assert_allclose(back.final, [math.cos(1.0), math.sin(1.0)], atol=1e-12)
    assert back.t0 == 0.0 and back.t1 == -1.0


def test_integrate_ivp_reports_blowup():
    with pytest.raises(IntegrationError):
        integrate_ivp(lambda t, y: [y[0] ** 2], [1.0], (0.0, 2.0))
    with pytest.raises(RangeError):
        integrate_ivp(lambda t, y: [0.0], [1.0], (1.0, 1.0))
