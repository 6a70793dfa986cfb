import math

import numpy as np
import pytest

from combdrive.errors import AdmissibilityError
from combdrive.firstorder import (
    COSINE_FORM,
    GENERAL_INTEGRAL,
    QUARTER_FORM,
    UNDETERMINED,
    a_coefficient,
    convexity_certificate,
    f23,
    first_order_verdict,
    frequency_condition,
    g_function,
    orbit_integral,
    predict_stability,
    tau_prime_even,
    tau_prime_odd,
)
from combdrive.hill import ELLIPTIC, HYPERBOLIC
from combdrive.orbits import odd_orbit, orbit_state


@pytest.mark.parametrize("n", [1, 2, 3])
def test_methods_agree_and_shift_relation(params, n):
    odd = tau_prime_odd(2 * n, 1, params)
    even = tau_prime_even(2 * n, 1, params)
    assert set(odd.estimates) == {GENERAL_INTEGRAL, COSINE_FORM, QUARTER_FORM}
    assert odd.max_rel_disagreement <= 1e-8
    assert even.max_rel_disagreement <= 1e-8
    assert even.value == pytest.approx((-1) ** n * odd.value, rel=1e-8)


def test_quarter_form_power_rule(params):
    # (4, 2) is the (2, 1) curve run twice: tr(M^2) = tr(M)^2 - 2 has slope 4 tau' at tau = 2
    one = tau_prime_odd(2, 1, params).value
    two = tau_prime_odd(4, 2, params)
    assert two.value == pytest.approx(4.0 * one, rel=1e-9)
    assert two.estimates[QUARTER_FORM] == pytest.approx(two.value, rel=1e-9)


def test_a_coefficient_consistency(params):
    tp = tau_prime_odd(2, 1, params)
    A1 = a_coefficient(1, params)
    assert tp.value == pytest.approx(4.0 * params.omega0**2 * tp.dT * A1, rel=1e-9)
    # G ~ 4 beta V0 away from x = 0 dips; the integral is close to -3/8 at default parameters
    assert A1 == pytest.approx(-0.3744, abs=1e-3)
    with pytest.raises(AdmissibilityError):
        a_coefficient(0, params)


def test_integration_by_parts_identity_pointwise(params):
    # -F23 x' and omega0^2 G cos differ by d/dt(G P'), which integrates to zero over a period
    o = odd_orbit(3, 1, params)
    G, F = g_function(o), f23(o)
    span = o.m * params.Tv
    lhs = orbit_integral(o, lambda t: -F(t) * orbit_state(o, t)[1], 0.0, span)
    rhs = orbit_integral(o, lambda t: G(t) * np.cos(t), 0.0, span)
    assert lhs == pytest.approx(rhs, abs=1e-12)


@pytest.mark.parametrize("m,p", [(3, 1), (3, 2), (5, 2)])
def test_delicate_cases_vanish(params, m, p):
    for fn in (tau_prime_odd, tau_prime_even):
        tp = fn(m, p, params)
        assert tp.delicate and tp.n is None
        assert tp.relative_size <= 1e-8
        assert first_order_verdict(tp).kind == UNDETERMINED


def test_predictions(params):
    assert predict_stability(2, 1, "odd", params).kind == ELLIPTIC
    assert predict_stability(4, 1, "odd", params).kind == HYPERBOLIC
    assert predict_stability(4, 1, "even", params).kind == HYPERBOLIC
    assert predict_stability(3, 1, "odd", params).kind == UNDETERMINED
    with pytest.raises(AdmissibilityError):
        predict_stability(1, 1, "odd", params)
    with pytest.raises(ValueError):
        predict_stability(2, 1, "sideways", params)


def test_frequency_condition(params):
    # omega0 = 1 < 2 n sqrt(0.75) for every n >= 1
    assert all(frequency_condition(n, params) for n in range(1, 5))
    from combdrive.model import ModelParams

    fast = ModelParams(Tv=2 * math.pi / 2.0)
    assert not frequency_condition(1, fast)
    assert frequency_condition(2, fast)


def test_first_order_verdict_follows_sign(params):
    assert first_order_verdict(tau_prime_odd(2, 1, params)).kind == ELLIPTIC
    assert first_order_verdict(tau_prime_even(2, 1, params)).kind == HYPERBOLIC


@pytest.mark.parametrize("n", [1, 2])
def test_convexity_report_measurements(params, n):
    rep = convexity_certificate(n, params)
    c = params.beta * params.V0**2
    assert rep.u_at_0 == pytest.approx(20 * c, abs=1e-12)
    assert rep.u_at_1 == pytest.approx(2 * rep.hbar, abs=1e-12)
    assert rep.g2_identity_error < 1e-8
    o = odd_orbit(2 * n, 1, params)
    assert rep.y1_physical == pytest.approx(1 - o.x_plus**2, rel=1e-14)
    # the cubic has a negative dip inside [y1, 1] at default parameters; reported, not hidden
    assert rep.u_min < 0 and not rep.passed
    assert any("U(Y)" in v for v in rep.violations)
