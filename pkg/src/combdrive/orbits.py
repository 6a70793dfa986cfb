"""Odd and even (m, p)-periodic solutions of the autonomous equation.

An orbit is stored as (symmetry, energy level, symmetric initial value) and
re-integrated on demand.  The canonical evaluator integrates the quarter arc
from the turning point (x+, 0) to the next zero crossing and extends it with
the reversing symmetries

    C(-t) = C(t),  C(T/2 - t) = -C(t),  S(t) = C(t - T/4).

Starting at the turning point matters: near the separatrix the level is only
resolved through x* - x+, and integrating away from a turning point keeps
that precision, whereas integrating from (0, eta) does not.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import AdmissibilityError, RangeError
from .model import ModelParams, autonomous_force, hamiltonian
from .numerics import IvpSolution, find_root, integrate_ivp
from .period import (
    EnergyLevel,
    max_p,
    period_inverse_level,
    turning_point_at_level,
)

ODD = "odd"
EVEN = "even"
ARC_RTOL = 1e-13


@dataclass(frozen=True)
class AutonomousOrbit:
    """A symmetric periodic solution of the delta = 0 equation.

    ``init`` is eta (odd: starts at (0, eta)) or xi (even: starts at (xi, 0)).
    ``n`` is set when m = 2 n p.
    """

    symmetry: str
    m: int
    p: int
    hbar: float
    gap: float
    init: float
    minimal_period: float
    x_plus: float
    params: ModelParams = field(repr=False)
    n: int | None = None

    @property
    def level(self) -> EnergyLevel:
        return EnergyLevel(self.hbar, self.gap)

    @property
    def initial_state(self) -> tuple[float, float]:
        return (0.0, self.init) if self.symmetry == ODD else (self.init, 0.0)

    @property
    def span(self) -> float:
        """Forcing-commensurate period m*Tv."""
        return self.m * self.params.Tv

    def state(self, t):
        """(x, xdot) at times ``t`` from the symmetric extension of the quarter arc."""
        return orbit_state(self, t)


@dataclass(frozen=True)
class Trajectory:
    t: np.ndarray
    x: np.ndarray
    xdot: np.ndarray
    H: np.ndarray
    method: str
    solution: IvpSolution | None = None
    evaluator: object = None

    def dense(self, t):
        if self.evaluator is not None:
            return self.evaluator(t)
        if self.solution is not None:
            y = self.solution(t)
            return y[0], y[1]
        raise RangeError("trajectory has no dense evaluator")

    def to_rows(self):
        return zip(self.t, self.x, self.xdot, self.H)


def check_admissible(m: int, p: int, params: ModelParams) -> int:
    nu = max_p(m, params)
    if not (isinstance(m, (int, np.integer)) and isinstance(p, (int, np.integer))):
        raise AdmissibilityError(f"m and p must be integers (got {m!r}, {p!r})")
    if not 1 <= p <= nu:
        raise AdmissibilityError(f"(m={m}, p={p}) not admissible: need 1 <= p <= nu_{m} = {nu}")
    return nu


def _pair_index(m: int, p: int) -> int | None:
    return m // (2 * p) if m % (2 * p) == 0 else None


@lru_cache(maxsize=256)
def _level_for(m: int, p: int, params: ModelParams) -> EnergyLevel:
    # cache on the reduced ratio so (4, 2) and (2, 1) share one level
    g = math.gcd(m, p)
    if g != 1:
        return _level_for(m // g, p // g, params)
    return period_inverse_level(m * params.Tv / p, params)


def _make(symmetry: str, m: int, p: int, params: ModelParams) -> AutonomousOrbit:
    check_admissible(m, p, params)
    level = _level_for(m, p, params)
    xp = turning_point_at_level(level, params)
    init = math.sqrt(2.0 * level.hbar) if symmetry == ODD else xp
    return AutonomousOrbit(
        symmetry=symmetry,
        m=m,
        p=p,
        hbar=level.hbar,
        gap=level.gap,
        init=init,
        minimal_period=m * params.Tv / p,
        x_plus=xp,
        params=params,
        n=_pair_index(m, p),
    )


def odd_orbit(m: int, p: int, params: ModelParams) -> AutonomousOrbit:
    """Odd (m, p)-periodic solution: x(0) = 0, xdot(0) = eta = sqrt(2 hbar)."""
    return _make(ODD, m, p, params)


def even_orbit(m: int, p: int, params: ModelParams) -> AutonomousOrbit:
    """Even (m, p)-periodic solution: x(0) = xi = x+(hbar), xdot(0) = 0."""
    return _make(EVEN, m, p, params)


def _offset_field(params: ModelParams):
    """Autonomous flow in u = x* - x, v = xdot; exact near the positive saddle."""
    xs, s = params.x_star, params.s

    def rhs(t, y):
        u, v = y
        x = xs - u
        big_a = u * (2.0 * xs - u)
        a = s + big_a
        return [-v, -x * big_a * (a + s) / (a * a)]

    return rhs


def _saddle_offset(level: EnergyLevel, params: ModelParams) -> float:
    xp = turning_point_at_level(level, params)
    w = params.x_star**2 - xp * xp if level.hbar <= 0.5 * params.hbar_star else None
    if w is None:
        g = level.gap
        w = g + math.sqrt(g * g + 2.0 * g * params.s)
    return w / (params.x_star + xp)


def orbit_saddle_offset(orbit: AutonomousOrbit) -> float:
    """x* - x+ for the orbit's level, free of cancellation."""
    return _saddle_offset(orbit.level, orbit.params)


@dataclass(frozen=True)
class QuarterArc:
    solution: IvpSolution
    quarter: float
    seam: float  # |x(T/4)|, should vanish


@lru_cache(maxsize=256)
def _quarter_arc(level: EnergyLevel, period: float, params: ModelParams) -> QuarterArc:
    d = _saddle_offset(level, params)
    quarter = 0.25 * period
    atol = ARC_RTOL * 1e-3 * min(d, 1.0)
    sol = integrate_ivp(_offset_field(params), [d, 0.0], (0.0, quarter), ARC_RTOL, atol)
    seam = abs(params.x_star - sol.final[0])
    return QuarterArc(sol, quarter, seam)


def quarter_arc(orbit: AutonomousOrbit) -> QuarterArc:
    return _quarter_arc(orbit.level, orbit.minimal_period, orbit.params)


def orbit_state(orbit: AutonomousOrbit, t):
    """Evaluate (x, xdot) of ``orbit`` at ``t`` (scalar or array)."""
    arc = quarter_arc(orbit)
    T = orbit.minimal_period
    q = arc.quarter
    t = np.asarray(t, dtype=float)
    tau = t - q if orbit.symmetry == ODD else t
    tau = np.mod(tau, T)
    sign = np.where(tau >= 0.5 * T, -1.0, 1.0)
    tau = np.where(tau >= 0.5 * T, tau - 0.5 * T, tau)
    mirror = tau > q
    tau = np.where(mirror, 0.5 * T - tau, tau)
    tau = np.clip(tau, 0.0, q)
    u, v = arc.solution(tau.ravel())
    x = (orbit.params.x_star - u).reshape(tau.shape)
    v = v.reshape(tau.shape)
    # C(T/2 - s) = -C(s): position flips sign, velocity keeps it
    x = np.where(mirror, -x, x) * sign
    v = v * sign
    return x, v


def _direct_field(params: ModelParams):
    def rhs(t, y):
        return [y[1], -autonomous_force(y[0], params)]

    return rhs


def sample_orbit(
    orbit: AutonomousOrbit,
    num_points: int,
    periods: int = 1,
    method: str = "arc",
    rel_tol: float = 1e-12,
) -> Trajectory:
    """Samples of (x, xdot, H) over ``periods`` minimal periods starting at t = 0.

    ``method="arc"`` uses the symmetric extension of the turning-point arc;
    ``method="direct"`` integrates forward from the symmetric initial state.
    """
    if num_points < 2:
        raise RangeError("num_points must be at least 2")
    T = orbit.minimal_period * periods
    t = np.linspace(0.0, T, num_points)
    params = orbit.params
    if method == "arc":
        x, v = orbit_state(orbit, t)
        H = hamiltonian(x, v, params)
        return Trajectory(t, x, v, H, "arc", None, lambda s: orbit_state(orbit, s))
    if method != "direct":
        raise ValueError(f"unknown method {method!r}")
    sol = integrate_ivp(
        _direct_field(params), orbit.initial_state, (0.0, T * (1 + 1e-9)), rel_tol, 1e-14
    )
    y = sol(t)
    H = hamiltonian(y[0], y[1], params)
    return Trajectory(t, y[0], y[1], H, "direct", sol)


def find_zeros(traj: Trajectory, t0: float, t1: float, resolution: int = 4000) -> np.ndarray:
    """Zero crossings of x on [t0, t1], refined on the dense evaluator."""
    grid = np.linspace(t0, t1, resolution + 1)
    xg = np.asarray(traj.dense(grid)[0])
    zeros = []
    for i in range(resolution):
        a, b = xg[i], xg[i + 1]
        if a == 0.0:
            zeros.append(grid[i])
        elif a * b < 0:
            f = lambda s: float(np.asarray(traj.dense(np.array([s]))[0])[0])
            zeros.append(find_root(f, grid[i], grid[i + 1], tol=1e-14))
    if xg[-1] == 0.0:
        zeros.append(grid[-1])
    return np.array(zeros)


def count_zeros(traj: Trajectory, interval: tuple[float, float], rel_tol: float = 1e-9) -> int:
    """Number of zeros of x on the half-open ``interval`` [t0, t1).

    Zeros within ``rel_tol * (t1 - t0)`` of t1 belong to the next window.
    Warns if a zero is (numerically) tangential.
    """
    t0, t1 = interval
    pad = rel_tol * (t1 - t0)
    if traj.evaluator is not None:
        lo, hi = t0 - pad, t1 + pad
    else:
        lo = max(t0 - pad, float(traj.solution.t0))
        hi = min(t1 + pad, float(traj.solution.t1))
    zeros = find_zeros(traj, lo, hi)
    zeros = zeros[(zeros >= t0 - pad) & (zeros < t1 - pad)]
    if zeros.size:
        _, v = traj.dense(zeros)
        if np.any(np.abs(v) < 1e-10):
            warnings.warn("tangential zero detected", RuntimeWarning, stacklevel=2)
    return int(zeros.size)


@dataclass
class SymmetryResiduals:
    """Residuals of the reversing symmetries along a re-integrated orbit.

    Measured on a direct integration seeded at the turning point (x+, 0)
    and run half a period in each direction.
    """

    symmetry: str
    parity: float  # |x(-t) + x(t)| (odd) or |x(-t) - x(t)| (even)
    antiperiodicity: float  # |x(t + T/2) + x(t)|
    reflection: float  # |x(T/2 - t) - x(t)| (odd) or |x(T/2 - t) + x(t)| (even)
    seam: float  # |x| at the expected zero crossings
    energy_drift: float
    measured_period: float
    period_error: float  # relative to m Tv / p
    quarter_shift: float | None = None  # max |S(t + T/4) - C(t)|
    monotone_slope: float | None = None  # min slope of phi_n on [0, n Tv / 2] (m = 2np)

    def max_residual(self) -> float:
        vals = [self.parity, self.antiperiodicity, self.reflection, self.seam]
        if self.quarter_shift is not None:
            vals.append(self.quarter_shift)
        return max(vals)


def _seeded_window(orbit: AutonomousOrbit, rel_tol: float):
    """Integrate from the turning point half a period backwards and forwards."""
    params = orbit.params
    T = orbit.minimal_period
    t_turn = 0.25 * T if orbit.symmetry == ODD else 0.0
    seed = [orbit.x_plus, 0.0]
    rhs = _direct_field(params)
    atol = 1e-15
    back = integrate_ivp(rhs, seed, (t_turn, t_turn - 0.5 * T), rel_tol, atol)
    fwd = integrate_ivp(rhs, seed, (t_turn, t_turn + 0.5 * T), rel_tol, atol)

    def evaluate(t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.empty((2, t.size))
        left = t < t_turn
        if np.any(left):
            out[:, left] = back(t[left])
        if np.any(~left):
            out[:, ~left] = fwd(t[~left])
        return out

    return evaluate, t_turn, back, fwd


def symmetry_residuals(orbit: AutonomousOrbit, num: int = 2001, rel_tol: float = 1e-13) -> SymmetryResiduals:
    params = orbit.params
    T = orbit.minimal_period
    ev, t_turn, back, fwd = _seeded_window(orbit, rel_tol)
    h = np.linspace(0.0, 0.5 * T, num)
    if orbit.symmetry == ODD:
        # window [-T/4, 3T/4]
        tq = np.linspace(0.0, 0.25 * T, num)
        parity = np.max(np.abs(ev(-tq)[0] + ev(tq)[0]))
        ta = np.linspace(-0.25 * T, 0.25 * T, num)
        anti = np.max(np.abs(ev(ta + 0.5 * T)[0] + ev(ta)[0]))
        refl = np.max(np.abs(ev(0.5 * T - h)[0] - ev(h)[0]))
        zero_times = np.array([t_turn - 0.25 * T, t_turn + 0.25 * T])
    else:
        # window [-T/2, T/2]
        parity = np.max(np.abs(ev(-h)[0] - ev(h)[0]))
        ta = np.linspace(-0.5 * T, 0.0, num)
        anti = np.max(np.abs(ev(ta + 0.5 * T)[0] + ev(ta)[0]))
        refl = np.max(np.abs(ev(0.5 * T - h)[0] + ev(h)[0]))
        zero_times = np.array([-0.25 * T, 0.25 * T])
    seam = float(np.max(np.abs(ev(zero_times)[0])))

    # re-measure the period from the two zero crossings around the seed
    def crossing(sol, guess):
        f = lambda s: float(sol(s)[0])
        width = 0.05 * T
        lo, hi = sorted((guess - width, guess + width))
        lo, hi = max(lo, min(sol.t0, sol.t1)), min(hi, max(sol.t0, sol.t1))
        return find_root(f, lo, hi, tol=1e-15 * T)

    z_back = crossing(back, t_turn - 0.25 * T)
    z_fwd = crossing(fwd, t_turn + 0.25 * T)
    measured = 2.0 * (z_fwd - z_back)

    samples = ev(np.linspace(t_turn - 0.5 * T, t_turn + 0.5 * T, num))
    H = hamiltonian(samples[0], samples[1], params)
    drift = float(np.max(np.abs(H - orbit.hbar)))

    mono = None
    if orbit.n is not None and orbit.symmetry == ODD:
        tm = np.linspace(0.0, 0.5 * orbit.n * params.Tv, num)
        mono = float(np.min(np.diff(ev(tm)[0]) / np.diff(tm)))

    shift = None
    if orbit.symmetry == EVEN:
        ev_odd, *_ = _seeded_window(odd_orbit(orbit.m, orbit.p, params), rel_tol)
        ts = np.linspace(-0.5 * T, 0.5 * T, num)
        shift = float(np.max(np.abs(ev_odd(ts + 0.25 * T)[0] - ev(ts)[0])))
    target = orbit.m * params.Tv / orbit.p
    return SymmetryResiduals(
        symmetry=orbit.symmetry,
        parity=float(parity),
        antiperiodicity=float(anti),
        reflection=float(refl),
        seam=seam,
        energy_drift=drift,
        measured_period=measured,
        period_error=abs(measured - target) / target,
        quarter_shift=shift,
        monotone_slope=mono,
    )


def quarter_shift_residual(m: int, p: int, params: ModelParams, num: int = 2001) -> float:
    """max_t |S(t + T/4) - C(t)| for the odd/even pair at the same level, t in [-T/2, T/2]."""
    return symmetry_residuals(even_orbit(m, p, params), num=num).quarter_shift


__all__ = [
    "orbit_saddle_offset",
    "AutonomousOrbit",
    "Trajectory",
    "SymmetryResiduals",
    "odd_orbit",
    "even_orbit",
    "orbit_state",
    "sample_orbit",
    "symmetry_residuals",
    "count_zeros",
    "find_zeros",
    "quarter_arc",
    "check_admissible",
    "ODD",
    "EVEN",
]

