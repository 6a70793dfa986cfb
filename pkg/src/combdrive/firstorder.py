"""First-order trace derivative tau'(0) and the stability predictions built on it.

Along a delta = 0 orbit x(t) of period T = m Tv / p, the derivative of the
Poincare trace with respect to the drive amplitude is

    tau'(0) = -p T'(h) int_0^{m Tv} F23(t) x'(t) dt,        F23 = d2F/dt d(delta)
            = omega0^2 p T'(h) int_0^{m Tv} G(t) cos(omega0 t) dt,  G = 4 beta V0 / (1 - x^2)

(the second form follows from the first by parts, using P = cos).  When
m = 2 n p, G has period n Tv and is even about n Tv / 2, so the integral
collapses to 4 p A_n with

    A_n = int_0^{n Tv / 2} G_n(t) cos(omega0 t) dt.

When m / (2p) is not an integer, cos(omega0 t) is orthogonal to every Fourier
mode of G and tau'(0) = 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import AdmissibilityError
from .hill import (
    ELLIPTIC,
    FIRST_ORDER,
    HYPERBOLIC,
    THEOREM,
    StabilityVerdict,
)
from .model import CosineProfile, DriveSpec, ModelParams
from .numerics import quad_regularized
from .orbits import EVEN, ODD, AutonomousOrbit, check_admissible, even_orbit, odd_orbit, orbit_state
from .period import period_derivative_at_level

__all__ = [
    "GENERAL_INTEGRAL",
    "COSINE_FORM",
    "QUARTER_FORM",
    "UNDETERMINED",
    "UNDETERMINED_FREQUENCY",
    "TracePrime",
    "ConvexityReport",
    "g_function",
    "f23",
    "orbit_integral",
    "tau_prime_odd",
    "tau_prime_even",
    "a_coefficient",
    "convexity_certificate",
    "frequency_condition",
    "first_order_verdict",
    "predict_stability",
]

GENERAL_INTEGRAL = "GeneralIntegral"
COSINE_FORM = "CosineForm"
QUARTER_FORM = "QuarterForm"
UNDETERMINED = "Undetermined (delicate)"
UNDETERMINED_FREQUENCY = "Undetermined (frequency condition)"

ORBIT_QUAD_TOL = 1e-13
PANELS_PER_QUARTER = 8


@dataclass(frozen=True)
class TracePrime:
    """tau'(0) for one orbit, with every applicable estimate.

    ``value`` is the general-integral estimate.  ``scale`` is
    omega0^2 p T' int |G| dt, the natural size of the integrals involved; the
    delicate case is judged relative to it.
    """

    value: float
    symmetry: str
    m: int
    p: int
    n: int | None
    method: str
    delicate: bool
    scale: float
    dT: float
    estimates: dict = field(default_factory=dict)

    @property
    def max_rel_disagreement(self) -> float:
        vals = list(self.estimates.values())
        ref = max(abs(v) for v in vals)
        if ref == 0.0:
            return 0.0
        return max(abs(a - b) for a in vals for b in vals) / ref

    @property
    def relative_size(self) -> float:
        return abs(self.value) / self.scale


def _cosine(params: ModelParams, drive: DriveSpec | None) -> CosineProfile:
    prof = (drive or DriveSpec()).bind(params).profile
    if not isinstance(prof, CosineProfile):
        raise TypeError("first-order formulas are implemented for the cosine profile")
    return prof


def g_function(orbit: AutonomousOrbit):
    """G(t) = 4 beta V0 / (1 - x(t)^2) along ``orbit``."""
    c = 4.0 * orbit.params.beta * orbit.params.V0

    def G(t):
        x, _ = orbit_state(orbit, t)
        return c / (1.0 - x * x)

    return G


def f23(orbit: AutonomousOrbit, drive: DriveSpec | None = None):
    """F23(t) = -8 beta V0 x(t) P'(t) / (1 - x(t)^2)^2 along ``orbit``."""
    params = orbit.params
    prof = _cosine(params, drive)
    c = -8.0 * params.beta * params.V0

    def F(t):
        x, _ = orbit_state(orbit, t)
        a = 1.0 - x * x
        return c * x * prof.rate(t) / (a * a)

    return F


def orbit_integral(orbit: AutonomousOrbit, g, t0: float, t1: float, tol: float = ORBIT_QUAD_TOL) -> float:
    """int_{t0}^{t1} g(t) dt for a smooth function of the orbit.

    Panels break at multiples of T/4 (where the symmetric evaluator switches
    arcs), each quarter split further; Gauss-Legendre doubling to ``tol``.
    """
    quarter = 0.25 * orbit.minimal_period
    k0, k1 = math.floor(t0 / quarter), math.ceil(t1 / quarter)
    fine = quarter / PANELS_PER_QUARTER
    edges = np.arange(k0 * PANELS_PER_QUARTER, k1 * PANELS_PER_QUARTER + 1) * fine
    edges = edges[(edges > t0) & (edges < t1)]
    return quad_regularized(g, tol, t0, t1, breakpoints=list(edges))


def _scale(orbit: AutonomousOrbit, omega0: float, dT: float) -> float:
    G = g_function(orbit)
    span = orbit.m * orbit.params.Tv
    return omega0**2 * orbit.p * dT * orbit_integral(orbit, lambda t: np.abs(G(t)), 0.0, span)


def _estimates(orbit: AutonomousOrbit, drive: DriveSpec | None):
    params = orbit.params
    prof = _cosine(params, drive)
    w0 = prof.omega0
    dT = period_derivative_at_level(orbit.level, params)
    span = orbit.m * params.Tv
    G = g_function(orbit)
    F = f23(orbit, drive)

    def dtau0_integrand(t):
        return F(t) * orbit_state(orbit, t)[1]

    general = -orbit.p * dT * orbit_integral(orbit, dtau0_integrand, 0.0, span)
    cosine = w0**2 * orbit.p * dT * orbit_integral(orbit, lambda t: G(t) * np.cos(w0 * t), 0.0, span)
    return {GENERAL_INTEGRAL: general, COSINE_FORM: cosine}, dT, w0


def tau_prime_odd(m: int, p: int, params: ModelParams, drive: DriveSpec | None = None) -> TracePrime:
    """tau'(0) along the odd (m, p) orbit, by every applicable formula.

    For m = 2 n p the quarter form 4 p^2 omega0^2 T'(h_n) A_n is added (the
    factor p^2 is 1 for the (2n, 1) orbits; the (2np, p) orbit is the same
    curve traversed p times, and tr(M^p) has slope p^2 at a parabolic M).
    """
    orbit = odd_orbit(m, p, params)
    est, dT, w0 = _estimates(orbit, drive)
    if orbit.n is not None:
        est[QUARTER_FORM] = 4.0 * p * p * w0**2 * dT * _a_integral(orbit, w0)
    return TracePrime(
        value=est[GENERAL_INTEGRAL],
        symmetry=ODD,
        m=m,
        p=p,
        n=orbit.n,
        method=GENERAL_INTEGRAL,
        delicate=orbit.n is None,
        scale=_scale(orbit, w0, dT),
        dT=dT,
        estimates=est,
    )


def tau_prime_even(m: int, p: int, params: ModelParams, drive: DriveSpec | None = None) -> TracePrime:
    """tau-hat'(0) along the even (m, p) orbit.

    Computed directly from G-hat along the even orbit; when m = 2 n p the
    shift relation (-1)^n tau'(0) of the odd orbit is added as an estimate.
    """
    orbit = even_orbit(m, p, params)
    est, dT, w0 = _estimates(orbit, drive)
    if orbit.n is not None:
        odd = tau_prime_odd(m, p, params, drive)
        est["ShiftRelation"] = (-1) ** orbit.n * odd.value
    return TracePrime(
        value=est[GENERAL_INTEGRAL],
        symmetry=EVEN,
        m=m,
        p=p,
        n=orbit.n,
        method=GENERAL_INTEGRAL,
        delicate=orbit.n is None,
        scale=_scale(orbit, w0, dT),
        dT=dT,
        estimates=est,
    )


def _a_integral(orbit: AutonomousOrbit, omega0: float) -> float:
    G = g_function(orbit)
    half = 0.5 * orbit.n * orbit.params.Tv
    return orbit_integral(orbit, lambda t: G(t) * np.cos(omega0 * t), 0.0, half)


def a_coefficient(n: int, params: ModelParams) -> float:
    """A_n = int_0^{n Tv/2} G_n(t) cos(omega0 t) dt along the odd (2n, 1) orbit."""
    if n < 1:
        raise AdmissibilityError(f"n must be >= 1 (got {n})")
    orbit = odd_orbit(2 * n, 1, params)
    return _a_integral(orbit, params.omega0)


@dataclass(frozen=True)
class ConvexityReport:
    """Outcome of the convexity certificate for G_n on [0, n Tv / 2].

    ``y1`` is the closed-form root as stated; ``y1_physical`` is 1 - x+^2,
    the value Y_n actually takes at t = n Tv / 2.
    """

    n: int
    hbar: float
    y1: float
    y1_physical: float
    y1_error: float
    u_at_0: float
    u_at_1: float
    u_min: float
    u_argmin: float
    u_negative_count: int
    u_min_physical: float
    g2_identity_error: float
    g2_fd_min: float
    violations: tuple[str, ...]

    @property
    def passed(self) -> bool:
        return not self.violations


def _u_poly(Y, H: float, params: ModelParams):
    c = params.beta * params.V0**2
    return -2.0 * Y**3 + (12.0 * c + 6.0 - 6.0 * H) * Y**2 + (8.0 * H - 4.0 - 32.0 * c) * Y + 20.0 * c


def convexity_certificate(
    n: int, params: ModelParams, grid: int = 1000, y1_tol: float = 1e-10, g2_tol: float = 1e-8
) -> ConvexityReport:
    """Evaluate U(Y) on [y1, 1] and check G_n'' = 8 beta V0 Y^-4 U(Y) >= 0.

    Every stated property is checked; failures are listed in ``violations``
    rather than raised.
    """
    orbit = odd_orbit(2 * n, 1, params)
    H = orbit.hbar
    beta, V0 = params.beta, params.V0
    c = beta * V0**2
    radicand = 4.0 * beta**2 * V0**4 - 4.0 * c * H - 2.0 * c + H * H + 0.25 - H
    y1 = 0.5 - H + 2.0 * c - math.sqrt(radicand)
    y1_phys = 1.0 - orbit.x_plus**2

    Y = np.linspace(y1, 1.0, grid)
    U = _u_poly(Y, H, params)
    k = int(np.argmin(U))
    U_phys = _u_poly(np.linspace(y1_phys, 1.0, grid), H, params)

    # G'' along the orbit, closed form vs the U identity vs finite differences
    half = 0.5 * n * params.Tv
    t = np.linspace(0.0, half, 2001)[1:-1]
    x, v = orbit_state(orbit, t)
    Yt = 1.0 - x * x
    f = -x * (1.0 - 4.0 * c / Yt**2)  # x'' = -F
    dY, d2Y = -2.0 * x * v, -2.0 * (v * v + x * f)
    g2 = 4.0 * beta * V0 * (2.0 * dY**2 - Yt * d2Y) / Yt**3
    g2_u = 8.0 * beta * V0 * _u_poly(Yt, H, params) / Yt**4
    identity_err = float(np.max(np.abs(g2 - g2_u)) / np.max(np.abs(g2)))
    G = g_function(orbit)
    h = 1e-3
    g2_fd = (G(t + h) - 2.0 * G(t) + G(t - h)) / (h * h)

    violations = []
    if U.min() <= 0.0:
        violations.append(
            f"U(Y) <= 0 at {int(np.sum(U <= 0))}/{grid} grid points of [y1, 1]; min {U.min():.6g} at Y={Y[k]:.6g}"
        )
    if abs(_u_poly(0.0, H, params) - 20.0 * c) > 1e-12:
        violations.append("U(0) != 20 beta V0^2")
    if abs(_u_poly(1.0, H, params) - 2.0 * H) > 1e-12:
        violations.append("U(1) != 2 hbar_n")
    if abs(y1 - y1_phys) > y1_tol:
        violations.append(f"y1 = {y1:.12g} differs from 1 - x+^2 = {y1_phys:.12g}")
    if identity_err > 1e-8:
        violations.append(f"G'' = 8 beta V0 Y^-4 U(Y) fails (rel err {identity_err:.3e})")
    if g2_fd.min() < -g2_tol:
        violations.append(f"finite-difference G'' reaches {g2_fd.min():.3e}")

    return ConvexityReport(
        n=n,
        hbar=H,
        y1=y1,
        y1_physical=y1_phys,
        y1_error=abs(y1 - y1_phys),
        u_at_0=float(_u_poly(0.0, H, params)),
        u_at_1=float(_u_poly(1.0, H, params)),
        u_min=float(U[k]),
        u_argmin=float(Y[k]),
        u_negative_count=int(np.sum(U <= 0)),
        u_min_physical=float(U_phys.min()),
        g2_identity_error=identity_err,
        g2_fd_min=float(g2_fd.min()),
        violations=tuple(violations),
    )


def frequency_condition(n: int, params: ModelParams) -> bool:
    """omega0 < 2 n sqrt(1 - 4 beta V0^2)."""
    return params.omega0 < 2.0 * n * math.sqrt(params.stiffness)


def first_order_verdict(tp: TracePrime, tol: float = 1e-8) -> StabilityVerdict:
    """Verdict for small delta > 0 from the sign of tau'(0), given tau(0) = 2."""
    if tp.delicate or tp.relative_size <= tol:
        return StabilityVerdict(UNDETERMINED, 2.0, FIRST_ORDER, "tau'(0) vanishes")
    kind = ELLIPTIC if tp.value < 0 else HYPERBOLIC
    return StabilityVerdict(kind, 2.0, FIRST_ORDER, f"tau'(0) = {tp.value:.6g}")


def predict_stability(m: int, p: int, symmetry: str, params: ModelParams) -> StabilityVerdict:
    """Theorem-level prediction for the (m, p) orbit continued to small delta > 0.

    Odd, m = 2np: elliptic for n odd, hyperbolic for n even (needs the
    frequency condition).  Even, m = 2np: hyperbolic.  m / (2p) not an
    integer: undetermined at first order.
    """
    check_admissible(m, p, params)
    if symmetry not in (ODD, EVEN):
        raise ValueError(f"symmetry must be {ODD!r} or {EVEN!r}")
    if m % (2 * p):
        return StabilityVerdict(UNDETERMINED, 2.0, THEOREM, "m/(2p) is not an integer")
    n = m // (2 * p)
    if symmetry == EVEN:
        return StabilityVerdict(HYPERBOLIC, 2.0, THEOREM, f"n={n}")
    if not frequency_condition(n, params):
        return StabilityVerdict(UNDETERMINED_FREQUENCY, 2.0, THEOREM, f"n={n}")
    kind = ELLIPTIC if n % 2 else HYPERBOLIC
    return StabilityVerdict(kind, 2.0, THEOREM, f"n={n}")
