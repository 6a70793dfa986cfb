"""Hill equation along a periodic solution: fundamental solutions, trace, verdict.

Linearising x'' + F(x, t, delta) = 0 about a solution x(t) gives

    y'' + q(t) y = 0,   q(t) = dF/dx (x(t), t, delta).

With psi1 (psi1(0), psi1'(0)) = (1, 0) and psi2 (0, 1), the trace of the
Poincare matrix over [0, m Tv] is tau = psi1(m Tv) + psi2'(m Tv).  The base
flow and both variational copies are co-integrated as one 6-dimensional
system so that q is never interpolated.

Three trace paths are provided:

* :func:`monodromy`: the full span [0, m Tv] from a given initial state.
* :func:`reversible_trace`: half the span.  If q is even in t (true along odd
  and even solutions of the reversible equation), the monodromy factors
  through the half-period and tau = 2 (psi1 psi2' + psi1' psi2)(m Tv / 2).
* :func:`autonomous_trace`: a quarter of a minimal period, for delta = 0
  orbits.  It starts at the turning point and runs in u = x* - x, where the
  orbit's energy is best resolved.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import mpmath
import numpy as np
from scipy.integrate import solve_ivp

from .errors import DomainError, IntegrationError, PeriodicityError, RangeError
from .model import DriveSpec, ModelParams, dforce_dx
from .numerics import IvpSolution, integrate_ivp
from .orbits import AutonomousOrbit, _saddle_offset, orbit_saddle_offset

__all__ = [
    "ELLIPTIC",
    "HYPERBOLIC",
    "PARABOLIC",
    "NUMERICAL_TRACE",
    "FIRST_ORDER",
    "THEOREM",
    "Monodromy",
    "TraceEstimate",
    "StabilityVerdict",
    "hill_potential",
    "variational_flow",
    "monodromy",
    "matrix_monodromy",
    "reversible_trace",
    "autonomous_trace",
    "wronskian_residuals",
    "power_trace",
    "classify",
    "ChartFlow",
    "chart_flow",
    "chart_of",
    "to_chart",
    "from_chart",
    "odd_segment_trace",
    "even_segment_trace",
]

ELLIPTIC = "Elliptic"
HYPERBOLIC = "Hyperbolic"
PARABOLIC = "Parabolic"

NUMERICAL_TRACE = "NumericalTrace"
FIRST_ORDER = "FirstOrderCriterion"
THEOREM = "TheoremPrediction"

HILL_RTOL = 1e-13
HILL_ATOL = 1e-15
MAX_RETURN = 1e-7
# scipy clamps rtol at 100 * machine epsilon
QUARTER_RTOL = 3e-14


@dataclass(frozen=True)
class Monodromy:
    """Endpoint values of the normalised fundamental solutions at ``period_used``."""

    psi1_T: float
    dpsi1_T: float
    psi2_T: float
    dpsi2_T: float
    trace: float
    period_used: float
    determinant: float
    return_residual: float
    method: str = "direct"
    solution: IvpSolution | None = field(default=None, repr=False, compare=False)

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.psi1_T, self.psi2_T], [self.dpsi1_T, self.dpsi2_T]])


@dataclass(frozen=True)
class TraceEstimate:
    """Trace over ``period_used`` obtained from a shorter symmetric segment."""

    trace: float
    period_used: float
    segment: float
    wronskian_error: float
    method: str


@dataclass(frozen=True)
class StabilityVerdict:
    kind: str
    trace: float
    source: str
    note: str = ""

    @property
    def stable(self) -> bool | None:
        if self.kind == ELLIPTIC:
            return True
        if self.kind == HYPERBOLIC:
            return False
        return None


def _forced_terms(params: ModelParams, drive: DriveSpec):
    """Return (F, dF/dx) as a function of (x, t), factored like model.force."""
    xs, s, V0, beta = params.x_star, params.s, params.V0, params.beta
    prof = drive.bind(params).profile
    delta = drive.delta

    def terms(x, t):
        if not abs(x) < 1.0:
            raise DomainError(f"displacement reached |x| = {abs(x):.6g} at t = {t:.6g}")
        a = 1.0 - x * x
        ratio = delta * prof.value(t) / V0 if delta else 0.0
        f = x * ((xs - x) * (xs + x) - s * ratio) * (a + s * (1.0 + ratio)) / (a * a)
        v = V0 * (1.0 + ratio)
        q = 1.0 - 4.0 * beta * v * v * (1.0 + 3.0 * x * x) / (a * a * a)
        return f, q

    return terms


def _variational_field(params: ModelParams, drive: DriveSpec):
    terms = _forced_terms(params, drive)

    def rhs(t, y):
        f, q = terms(y[0], t)
        return [y[1], -f, y[3], -q * y[2], y[5], -q * y[4]]

    return rhs


def hill_potential(path, drive: DriveSpec, params: ModelParams):
    """q(t) = dF/dx along ``path``.

    ``path`` is any callable t -> (x, xdot) (an orbit evaluator, a Trajectory's
    ``dense``, or an IvpSolution).
    """
    drive = drive.bind(params)

    def q(t):
        x = np.asarray(path(t)[0], dtype=float)
        return dforce_dx(x, t, params, drive)

    return q


def variational_flow(
    initial_state,
    t_end: float,
    drive: DriveSpec,
    params: ModelParams,
    rel_tol: float = HILL_RTOL,
    abs_tol: float = HILL_ATOL,
    t0: float = 0.0,
) -> IvpSolution:
    """Co-integrate the base state and (psi1, psi2) from ``t0`` to ``t_end``.

    State layout: (x, x', psi1, psi1', psi2, psi2'); the variational copies
    start from the identity at ``t0``.  ``t_end < t0`` integrates backwards.
    """
    x0, v0 = map(float, initial_state)
    y0 = [x0, v0, 1.0, 0.0, 0.0, 1.0]
    try:
        return integrate_ivp(
            _variational_field(params, drive.bind(params)), y0, (t0, t_end), rel_tol, abs_tol
        )
    except DomainError as exc:
        raise IntegrationError(f"base solution left the domain: {exc}") from exc


def _span(m: int, params: ModelParams) -> float:
    if m < 1:
        raise RangeError(f"m must be >= 1 (got {m})")
    return m * params.Tv


def monodromy(
    initial_state,
    drive: DriveSpec,
    params: ModelParams,
    m: int,
    rel_tol: float = HILL_RTOL,
    abs_tol: float = HILL_ATOL,
    max_return: float = MAX_RETURN,
) -> Monodromy:
    """Poincare matrix of the Hill equation over [0, m Tv].

    Raises PeriodicityError if the base solution misses its initial state at
    m Tv by more than ``max_return``.
    """
    drive = drive.validate(params)
    T = _span(m, params)
    sol = variational_flow(initial_state, T, drive, params, rel_tol, abs_tol)
    x, v, a, da, b, db = sol.final
    x0, v0 = map(float, initial_state)
    ret = math.hypot(x - x0, v - v0)
    if ret > max_return:
        raise PeriodicityError(
            f"base solution is not {T:.12g}-periodic: return residual {ret:.3e} > {max_return:.1e}"
        )
    return Monodromy(
        psi1_T=float(a),
        dpsi1_T=float(da),
        psi2_T=float(b),
        dpsi2_T=float(db),
        trace=float(a + db),
        period_used=T,
        determinant=float(a * db - da * b),
        return_residual=ret,
        method="direct",
        solution=sol,
    )


def wronskian_residuals(mono: Monodromy, points: int = 10) -> np.ndarray:
    """|psi1 psi2' - psi1' psi2 - 1| at ``points`` interior times."""
    if mono.solution is None:
        raise RangeError("monodromy carries no dense solution")
    t = np.linspace(0.0, mono.period_used, points + 2)[1:-1]
    y = mono.solution(t)
    return np.abs(y[2] * y[5] - y[3] * y[4] - 1.0)


def matrix_monodromy(
    initial_state,
    drive: DriveSpec,
    params: ModelParams,
    m: int,
    rel_tol: float = 1e-12,
    abs_tol: float = 1e-14,
) -> np.ndarray:
    """State-transition matrix over [0, m Tv] from the 2x2 matrix flow.

    An independent path to :func:`monodromy`: Phi' = A(t) Phi with
    A = [[0, 1], [-q, 0]], integrated by an implicit Radau IIA scheme with an
    analytic Jacobian.  Returns Phi(m Tv).
    """
    drive = drive.validate(params)
    T = _span(m, params)
    terms = _forced_terms(params, drive)
    beta, V0 = params.beta, params.V0
    prof = drive.profile

    def rhs(t, y):
        f, q = terms(y[0], t)
        A = np.array([[0.0, 1.0], [-q, 0.0]])
        phi = y[2:].reshape(2, 2)
        return np.concatenate(([y[1], -f], (A @ phi).ravel()))

    def jac(t, y):
        x = y[0]
        f, q = terms(x, t)
        a = 1.0 - x * x
        v = V0 + drive.delta * prof.value(t)
        # dq/dx = -4 beta V^2 d/dx[(1 + 3x^2)/a^3] = -4 beta V^2 * 12 x (1 + x^2) / a^4
        dq = -48.0 * beta * v * v * x * (1.0 + x * x) / a**4
        J = np.zeros((6, 6))
        J[0, 1] = 1.0
        J[1, 0] = -q
        J[2, 4] = 1.0
        J[3, 5] = 1.0
        J[4, 2] = -q
        J[5, 3] = -q
        J[4, 0] = -dq * y[2]
        J[5, 0] = -dq * y[3]
        return J

    x0, v0 = map(float, initial_state)
    y0 = np.array([x0, v0, 1.0, 0.0, 0.0, 1.0])
    sol = solve_ivp(rhs, (0.0, T), y0, method="Radau", rtol=rel_tol, atol=abs_tol, jac=jac)
    if sol.status != 0:
        raise IntegrationError(f"matrix flow failed at t={sol.t[-1]:.6g}: {sol.message}", t=sol.t[-1])
    return sol.y[2:, -1].reshape(2, 2)


def reversible_trace(
    initial_state,
    drive: DriveSpec,
    params: ModelParams,
    m: int,
    rel_tol: float = HILL_RTOL,
    abs_tol: float = HILL_ATOL,
) -> TraceEstimate:
    """Trace over [0, m Tv] from the half span, for symmetric initial states.

    Requires x(0) = 0 (odd solution) or x'(0) = 0 (even solution), so that q
    is even in t.  Whether the state really starts an m Tv-periodic solution
    is the caller's business (see continuation's shooting residual).
    """
    x0, v0 = map(float, initial_state)
    if x0 != 0.0 and v0 != 0.0:
        raise RangeError("reversible_trace needs x(0) = 0 or x'(0) = 0")
    drive = drive.validate(params)
    T = _span(m, params)
    sol = variational_flow(initial_state, 0.5 * T, drive, params, rel_tol, abs_tol)
    _, _, a, da, b, db = sol.final
    trace = 2.0 * (a * db + da * b)
    return TraceEstimate(float(trace), T, 0.5 * T, abs(a * db - da * b - 1.0), "reversible")


def power_trace(trace: float, power: int) -> float:
    """tr(M^k) for a unimodular 2x2 M with tr(M) = trace (Chebyshev recurrence)."""
    if power < 0:
        raise RangeError("power must be >= 0")
    prev, cur = 2.0, trace
    if power == 0:
        return prev
    for _ in range(power - 1):
        prev, cur = cur, trace * cur - prev
    return cur


def _offset_variational_field(params: ModelParams):
    xs, s = params.x_star, params.s

    def rhs(t, y):
        u = y[0]
        x = xs - u
        big_a = u * (2.0 * xs - u)
        a = s + big_a
        q = 1.0 - s * s * (1.0 + 3.0 * x * x) / (a * a * a)
        return [-y[1], -x * big_a * (a + s) / (a * a), y[3], -q * y[2], y[5], -q * y[4]]

    return rhs


def autonomous_trace(
    orbit: AutonomousOrbit,
    rel_tol: float = QUARTER_RTOL,
    abs_tol: float = 1e-30,
    digits: int | None = None,
) -> TraceEstimate:
    """Trace over [0, m Tv] for a delta = 0 orbit from a quarter of its minimal period.

    In the frame where the orbit starts at the turning point, q is even about
    t = 0 and about t = T/4, so it has period T/2 and the half-period trace is
    2 (psi1 psi2' + psi1' psi2)(T/4).  Squaring gives the trace over T and the
    Chebyshev recurrence lifts it to m Tv = p T.  The trace is invariant under
    the time shift to the odd frame, so this serves both symmetry classes.

    In float64 the error grows like (shear over the quarter) * eps, about
    1e-6 for T ~ 4 Tv and 1e-3 for T ~ 5 Tv at defaults.  With ``digits``
    the quarter is integrated by mpmath's Taylor method at that working
    precision and stopped at the computed zero of x.
    """
    if digits is not None:
        return _autonomous_trace_mp(orbit.level, orbit.minimal_period, orbit.m, orbit.p, orbit.params, digits)
    params = orbit.params
    T = orbit.minimal_period
    quarter = 0.25 * T
    d = orbit_saddle_offset(orbit)
    sol = integrate_ivp(
        _offset_variational_field(params), [d, 0.0, 1.0, 0.0, 0.0, 1.0], (0.0, quarter), rel_tol, abs_tol
    )
    _, _, a, da, b, db = sol.final
    half = 2.0 * (a * db + da * b)
    full = half * half - 2.0
    return TraceEstimate(
        trace=float(power_trace(full, orbit.p)),
        period_used=orbit.m * params.Tv,
        segment=quarter,
        wronskian_error=float(abs(a * db - da * b - 1.0)),
        method="quarter",
    )


@lru_cache(maxsize=64)
def _autonomous_trace_mp(level, period: float, m: int, p: int, params: ModelParams, digits: int) -> TraceEstimate:
    with mpmath.workdps(digits):
        s = mpmath.mpf(params.s)
        xs = mpmath.sqrt(1 - s)
        d = mpmath.mpf(_saddle_offset(level, params))

        def rhs(t, y):
            u, v, a, da, b, db = y
            x = xs - u
            big_a = u * (2 * xs - u)
            aa = s + big_a
            q = 1 - s * s * (1 + 3 * x * x) / aa**3
            return [-v, -x * big_a * (aa + s) / aa**2, da, -q * a, db, -q * b]

        sol = mpmath.odefun(rhs, 0, [d, 0, 1, 0, 0, 1])
        quarter = mpmath.findroot(lambda t: xs - sol(t)[0], mpmath.mpf(0.25 * period))
        _, _, a, da, b, db = sol(quarter)
        half = 2 * (a * db + da * b)
        full = half * half - 2
        prev, cur = mpmath.mpf(2), full
        for _ in range(p - 1):
            prev, cur = cur, full * cur - prev
        return TraceEstimate(
            trace=float(cur),
            period_used=m * params.Tv,
            segment=float(quarter),
            wronskian_error=float(abs(a * db - da * b - 1)),
            method=f"quarter-mp{digits}",
        )


# Charts: z = x (chart 0) or z = x* - c x (chart c = +1 / -1).  Near a
# saddle the offset z keeps full relative precision, which x does not.
_ENTER_OFFSET = 0.6
_LEAVE_OFFSET = 0.4


@dataclass(frozen=True)
class ChartFlow:
    """End of a chart-switching variational integration.

    ``phi`` is the 2x2 fundamental matrix in (x, x') from the start time.
    """

    chart: int
    z: float
    v: float
    x: float
    phi: np.ndarray
    t: float


def chart_of(x: float, params: ModelParams) -> int:
    """Chart in which to represent a point: offset charts beyond half the saddle."""
    return int(np.sign(x)) if abs(x) > 0.5 * params.x_star else 0


def to_chart(x: float, chart: int, params: ModelParams) -> float:
    return x if chart == 0 else params.x_star - chart * x


def from_chart(z: float, chart: int, params: ModelParams) -> float:
    return z if chart == 0 else chart * (params.x_star - z)


def _chart_field(chart: int, params: ModelParams, drive: DriveSpec):
    xs, s, V0, beta = params.x_star, params.s, params.V0, params.beta
    prof = drive.profile
    delta = drive.delta

    def rhs(t, y):
        z = y[0]
        if chart == 0:
            x = z
            w = (xs - x) * (xs + x)
        else:
            x = chart * (xs - z)
            w = z * (2.0 * xs - z)
        a = 1.0 - x * x
        if not a > 0.0:
            raise DomainError(f"displacement reached |x| = {abs(x):.6g} at t = {t:.6g}")
        ratio = delta * prof.value(t) / V0 if delta else 0.0
        f = x * (w - s * ratio) * (a + s * (1.0 + ratio)) / (a * a)
        v = V0 * (1.0 + ratio)
        q = 1.0 - 4.0 * beta * v * v * (1.0 + 3.0 * x * x) / (a * a * a)
        dz = y[1] if chart == 0 else -chart * y[1]
        return [dz, -f, y[3], -q * y[2], y[5], -q * y[4]]

    return rhs


def _switch_event(chart: int, params: ModelParams):
    xs = params.x_star
    if chart == 0:
        ev = lambda t, y: abs(y[0]) - _ENTER_OFFSET * xs  # noqa: E731
        ev.direction = 1
    else:
        ev = lambda t, y: (xs - y[0]) - _LEAVE_OFFSET * xs  # noqa: E731
        ev.direction = -1
    ev.terminal = True
    return ev


def chart_flow(
    chart: int,
    z0: float,
    v0: float,
    t0: float,
    t1: float,
    drive: DriveSpec,
    params: ModelParams,
    rel_tol: float = QUARTER_RTOL,
    abs_tol: float = 1e-30,
    max_switches: int = 1000,
) -> ChartFlow:
    """Integrate base state and variations from ``t0`` to ``t1`` switching charts.

    The state starts at x = from_chart(z0, chart) with x' = v0; the
    variational part starts at the identity.  Either time direction works.
    """
    drive = drive.bind(params)
    y = np.array([z0, v0, 1.0, 0.0, 0.0, 1.0], dtype=float)
    t = float(t0)
    for _ in range(max_switches):
        try:
            sol = solve_ivp(
                _chart_field(chart, params, drive),
                (t, t1),
                y,
                method="DOP853",
                rtol=rel_tol,
                atol=abs_tol,
                events=_switch_event(chart, params),
            )
        except DomainError as exc:
            raise IntegrationError(f"base solution left the domain: {exc}") from exc
        if sol.status == -1:
            raise IntegrationError(f"integration stopped at t={sol.t[-1]:.12g}: {sol.message}", t=sol.t[-1])
        t, y = float(sol.t[-1]), sol.y[:, -1].copy()
        if sol.status == 0:
            break
        x = from_chart(y[0], chart, params)
        chart = int(np.sign(x)) if chart == 0 else 0
        y[0] = to_chart(x, chart, params)
    else:
        raise IntegrationError(f"more than {max_switches} chart switches", t=t)
    phi = np.array([[y[2], y[4]], [y[3], y[5]]])
    return ChartFlow(chart, float(y[0]), float(y[1]), float(from_chart(y[0], chart, params)), phi, t)


def _reflect_trace(phi_a: np.ndarray, phi_b: np.ndarray, inverse: bool) -> float:
    """tr(A B) with A = Pa^-1 R Pa, B = Pb^-1 R Pb (inverse=True) or Pa R Pa^-1, Pb R Pb^-1.

    R = diag(1, -1).  Expanded so that no product of the large factors is
    formed before the final combination.
    """
    (a1, b1), (c1, d1) = phi_a
    (a2, b2), (c2, d2) = phi_b
    k1, k2 = a1 * d1 + b1 * c1, a2 * d2 + b2 * c2
    if inverse:
        # P^-1 R P = [[k, 2bd], [-2ac, -k]]
        return 2.0 * k1 * k2 - 4.0 * (b1 * d1 * a2 * c2 + a1 * c1 * b2 * d2)
    # P R P^-1 = [[k, -2ab], [2cd, -k]]
    return 2.0 * k1 * k2 - 4.0 * (a1 * b1 * c2 * d2 + c1 * d1 * a2 * b2)


def odd_segment_trace(back: ChartFlow, fwd: ChartFlow) -> float:
    """Trace over [0, 2L] for q even about 0 and L, from an anchor t1 in (0, L).

    ``back`` runs t1 -> 0 and ``fwd`` runs t1 -> L.  With Phi(L, 0) =
    Pf Pb^-1 the monodromy is R Phi^-1 R Phi, whose trace is tr(B C) with
    B = Pb^-1 R Pb and C = Pf^-1 R Pf.
    """
    return _reflect_trace(back.phi, fwd.phi, inverse=True)


def even_segment_trace(left: ChartFlow, right: ChartFlow) -> float:
    """Trace over [0, 2L] for q even about 0 and L, from anchors at 0 and L.

    ``left`` runs 0 -> t_mid and ``right`` runs L -> t_mid.  With
    Phi(L, 0) = Qb^-1 Qa the trace is tr(Qa R Qa^-1 Qb R Qb^-1).
    """
    return _reflect_trace(left.phi, right.phi, inverse=False)


def classify(trace: float, tol: float = 1e-9, source: str = NUMERICAL_TRACE) -> StabilityVerdict:
    """Elliptic if |tau| < 2, hyperbolic if |tau| > 2, parabolic within ``tol`` of 2."""
    if tol <= 0:
        raise RangeError("tol must be positive")
    gap = abs(trace) - 2.0
    if abs(gap) <= tol:
        kind = PARABOLIC
    elif gap < 0:
        kind = ELLIPTIC
    else:
        kind = HYPERBOLIC
    return StabilityVerdict(kind, float(trace), source)
