import io

import pytest

from combdrive.continuation import (
    Anchor,
    autonomous_anchor,
    continue_family,
    family_records,
    read_jsonl,
    shoot,
    shoot_even,
    shoot_odd,
    trace_slope,
    trace_slope_fd,
    write_jsonl,
)
from combdrive.errors import AdmissibilityError, RangeError
from combdrive.firstorder import tau_prime_even, tau_prime_odd
from combdrive.hill import autonomous_trace
from combdrive.model import DriveSpec
from combdrive.orbits import even_orbit, odd_orbit


@pytest.mark.parametrize("m,p", [(2, 1), (3, 2), (4, 1), (5, 1)])
def test_shooting_at_zero_recovers_autonomous_orbit(params, m, p):
    o = shoot_odd(m, p, 0.0, None, params)
    e = shoot_even(m, p, 0.0, None, params)
    assert o.init == pytest.approx(odd_orbit(m, p, params).init, rel=1e-12)
    assert e.init == pytest.approx(even_orbit(m, p, params).init, rel=1e-12)
    assert o.shooting_residual < 1e-10 and e.shooting_residual < 1e-10
    assert o.return_residual < 1e-8 and e.return_residual < 1e-8


def test_scalar_guess_converges_to_same_orbit(params):
    ref = shoot("odd", 2, 1, 2e-3, None, params)
    from_eta = shoot_odd(2, 1, 2e-3, ref.init * (1 + 1e-4), params)
    assert from_eta.init == pytest.approx(ref.init, rel=1e-10)
    ref_e = shoot("even", 2, 1, 2e-3, None, params)
    from_xi = shoot_even(2, 1, 2e-3, ref_e.init * (1 - 1e-4), params)
    assert from_xi.init == pytest.approx(ref_e.init, rel=1e-10)


def test_forced_orbit_is_symmetric_and_periodic(params):
    from combdrive.hill import variational_flow

    d = 1e-3
    o = shoot("odd", 2, 1, d, None, params)
    y = variational_flow(o.initial_state, 2 * params.Tv, DriveSpec(d), params).final
    assert abs(y[0]) < 1e-9 and abs(y[1] - o.init) < 1e-9
    half = variational_flow(o.initial_state, params.Tv, DriveSpec(d), params).final
    assert abs(half[0]) < 1e-9


def test_zero_delta_trace_matches_quarter_method(params):
    for m, p in [(2, 1), (3, 1)]:
        ref = autonomous_trace(odd_orbit(m, p, params)).trace
        assert shoot("odd", m, p, 0.0, None, params).trace == pytest.approx(ref, abs=1e-6)


def test_family_and_slope_21(params):
    fam = continue_family(2, 1, "odd", (0.0, 1e-4, 2e-4), params)
    assert fam.complete and len(fam.members) == 3
    fd = trace_slope_fd(fam)
    assert fd == pytest.approx(tau_prime_odd(2, 1, params).value, rel=0.01)
    fam_e = continue_family(2, 1, "even", (0.0, 1e-4, 2e-4), params)
    assert trace_slope_fd(fam_e) == pytest.approx(tau_prime_even(2, 1, params).value, rel=0.01)


def test_data_driven_slope_for_near_separatrix_orbit(params):
    est = trace_slope("odd", 4, 1, params)
    assert est.change <= 1e-3
    assert est.value == pytest.approx(tau_prime_odd(4, 1, params).value, rel=0.01)
    assert 2 * est.step <= 2e-4


def test_family_aborts_cleanly(params):
    fam = continue_family(4, 1, "odd", (0.0, 1e-4), params)
    assert not fam.complete
    assert fam.aborted_at == 1e-4 and fam.reason
    assert len(fam.members) == 1


def test_grid_validation(params):
    with pytest.raises(RangeError):
        continue_family(2, 1, "odd", (1e-4, 2e-4), params)
    with pytest.raises(RangeError):
        continue_family(2, 1, "odd", (0.0, 2e-4, 1e-4), params)
    with pytest.raises(RangeError):
        continue_family(2, 1, "odd", (0.0, 0.6), params)
    with pytest.raises(AdmissibilityError):
        continue_family(1, 1, "odd", (0.0, 1e-4), params)
    with pytest.raises(ValueError):
        shoot("diagonal", 2, 1, 0.0, None, params)


def test_anchor_of_even_orbit_respects_half_period_sign(params):
    a = autonomous_anchor("even", 3, 1, params)
    assert a.chart_b == -a.chart
    b = autonomous_anchor("even", 4, 2, params)
    assert b.chart_b == b.chart
    assert isinstance(autonomous_anchor("odd", 2, 1, params), Anchor)


def test_jsonl_round_trip_is_byte_identical(params):
    fam = continue_family(2, 1, "even", (0.0, 1e-4, 2e-4), params)
    buf = io.StringIO()
    write_jsonl(family_records(fam), buf)
    text = buf.getvalue()
    rows = read_jsonl(io.StringIO(text))
    assert [r["delta"] for r in rows] == [0.0, 1e-4, 2e-4]
    assert set(rows[0]) == {"symmetry", "m", "p", "delta", "init", "trace", "residuals"}
    again = io.StringIO()
    write_jsonl(rows, again)
    assert again.getvalue() == text
    # the computation itself is deterministic
    buf2 = io.StringIO()
    write_jsonl(family_records(continue_family(2, 1, "even", (0.0, 1e-4, 2e-4), params)), buf2)
    assert buf2.getvalue() == text
