import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from combdrive.errors import RangeError
from combdrive.model import ModelParams, autonomous_force, turning_point
from combdrive.period import (
    energy_grid,
    max_p,
    period,
    period_derivative,
    period_derivative_fd,
    period_from_gap,
    period_inverse,
    period_inverse_level,
    period_point,
    verify_period_theorem,
)


def period_by_integration(hbar, params):
    """Oracle: time from the turning point to the first zero of x, times 4."""
    xp = turning_point(hbar, params)
    ev = lambda t, y: y[0]
    ev.terminal, ev.direction = True, -1
    sol = solve_ivp(
        lambda t, y: [y[1], -autonomous_force(y[0], params)],
        (0.0, 1e3),
        [xp, 0.0],
        method="DOP853",
        rtol=1e-13,
        atol=1e-15,
        events=ev,
    )
    return 4.0 * sol.t_events[0][0]


@pytest.mark.parametrize("rel", [0.01, 0.3, 0.9, 0.999])
def test_period_matches_direct_integration(params, rel):
    h = rel * params.hbar_star
    assert period(h, params) == pytest.approx(period_by_integration(h, params), rel=1e-10)


def test_small_energy_limit(params):
    assert period(1e-10 * params.hbar_star, params) == pytest.approx(7.25520, abs=1e-4)
    assert abs(period(1e-10 * params.hbar_star, params) - params.linear_period) < 1e-4


def test_divergence_at_separatrix(params):
    hs = params.hbar_star
    T = [period(hs * (1 - 10.0**-k), params) for k in (4, 6, 8, 10)]
    assert all(b > a for a, b in zip(T, T[1:]))
    assert T[-1] > 3 * params.linear_period
    # gap form reaches far beyond what hbar can resolve
    assert period_from_gap(1e-30, params) > period_from_gap(1e-20, params) > T[-1]


def test_derivative_matches_centered_differences(params):
    for h in energy_grid(params, 30):
        d = period_derivative(h, params)
        assert d > 0
        assert d == pytest.approx(period_derivative_fd(h, params), rel=1e-6)


@settings(max_examples=25, deadline=None)
@given(st.floats(7.3, 60.0))
def test_inverse_round_trip(T):
    p = ModelParams()
    lvl = period_inverse_level(T, p)
    assert period_from_gap(lvl.gap, p) == pytest.approx(T, rel=1e-11)


def test_inverse_rejects_targets_below_infimum(params):
    with pytest.raises(RangeError):
        period_inverse(7.0, params)


def test_admissibility_bound(params):
    # nu_m = floor(m Tv / T_lin); T_lin / Tv = 1.1547
    assert [max_p(m, params) for m in range(1, 6)] == [0, 1, 2, 3, 4]
    with pytest.raises(RangeError):
        max_p(0, params)


def test_period_rejects_energies_outside_the_loop(params):
    with pytest.raises(RangeError):
        period(params.hbar_star * 1.01, params)
    with pytest.raises(RangeError):
        period(-1.0, params)


def test_theorem_report_and_point(params):
    rep = verify_period_theorem(params, grid_size=40)
    assert rep.passed and rep.summary() == "3/3 properties pass"
    pt = period_point(0.05, params, with_fd=True)
    assert pt.T == pytest.approx(period(0.05, params))
    assert pt.dTdh == pytest.approx(pt.dTdh_fd, rel=1e-6)
    assert np.all(np.diff(rep.periods) > 0)


def test_scaling_with_tv_only_changes_forcing_period():
    # T(hbar) is autonomous: it must not depend on Tv
    a, b = ModelParams(Tv=2 * math.pi), ModelParams(Tv=3.0)
    assert period(0.07, a) == period(0.07, b)
