import math

import numpy as np
import pytest

from combdrive.errors import AdmissibilityError
from combdrive.model import hamiltonian
from combdrive.orbits import (
    ODD,
    check_admissible,
    count_zeros,
    even_orbit,
    find_zeros,
    odd_orbit,
    orbit_saddle_offset,
    quarter_shift_residual,
    sample_orbit,
    symmetry_residuals,
)
from combdrive.period import period_from_gap


def test_inadmissible_pair_cites_nu(params):
    with pytest.raises(AdmissibilityError, match="nu_1 = 0"):
        odd_orbit(1, 1, params)
    with pytest.raises(AdmissibilityError):
        check_admissible(3, 3, params)
    with pytest.raises(AdmissibilityError):
        check_admissible(2.0, 1, params)


def test_odd_21_orbit(params):
    o = odd_orbit(2, 1, params)
    assert o.symmetry == ODD and o.n == 1
    assert o.initial_state == (0.0, o.init)
    assert o.init == pytest.approx(math.sqrt(2 * o.hbar), rel=1e-15)
    assert period_from_gap(o.gap, params) == pytest.approx(2 * params.Tv, rel=1e-11)
    traj = sample_orbit(o, 2001)
    assert count_zeros(traj, (0.0, 2 * params.Tv)) == 2
    res = symmetry_residuals(o)
    assert res.max_residual() <= 1e-8
    assert res.measured_period == pytest.approx(2 * params.Tv, rel=1e-9)
    assert res.monotone_slope > 0


def test_even_orbit_shares_level_with_odd(params):
    o, e = odd_orbit(4, 1, params), even_orbit(4, 1, params)
    assert e.hbar == o.hbar and e.gap == o.gap
    assert e.initial_state == (e.x_plus, 0.0)
    assert quarter_shift_residual(2, 1, params) <= 1e-8


def test_saddle_offset_is_accurate_near_separatrix(params):
    o = odd_orbit(5, 1, params)
    d = orbit_saddle_offset(o)
    assert 0 < d < 1e-3
    assert d == pytest.approx(params.x_star - o.x_plus, rel=1e-4)


def test_reduced_ratio_shares_the_level(params):
    assert odd_orbit(4, 2, params).hbar == odd_orbit(2, 1, params).hbar


@pytest.mark.parametrize("m,p", [(2, 1), (3, 2), (4, 3), (5, 2)])
@pytest.mark.parametrize("kind", [odd_orbit, even_orbit])
def test_zero_count_energy_and_direct_agreement(params, m, p, kind):
    o = kind(m, p, params)
    arc = sample_orbit(o, 801, periods=p)
    assert count_zeros(arc, (0.0, m * params.Tv)) == 2 * p
    assert np.max(np.abs(arc.H - o.hbar)) <= 1e-9
    direct = sample_orbit(o, 801, periods=p, method="direct", rel_tol=1e-13)
    np.testing.assert_allclose(direct.t, arc.t)
    np.testing.assert_allclose(direct.x, arc.x, atol=1e-7)
    np.testing.assert_allclose(hamiltonian(direct.x, direct.xdot, params), o.hbar, atol=1e-10)


def test_zero_times_of_odd_orbit(params):
    o = odd_orbit(3, 1, params)
    z = find_zeros(sample_orbit(o, 3), 0.0, o.minimal_period * 0.99)
    np.testing.assert_allclose(z, [0.0, 0.5 * o.minimal_period], atol=1e-10)
