"""Period function T(hbar) of the autonomous oscillation and its derivative.

Energies are handled as the pair (hbar, gap) with gap = hbar* - hbar.  Orbits
whose period is a few times the linear one sit within 1e-10 (relative) of the
separatrix, where hbar alone no longer resolves the level; the ``*_gap``
entry points take the gap directly.

Both T and T' are written over x = x+ cos(phi), phi in [0, pi/2], which
absorbs the inverse square root at the turning point.  With s = 1 - x*^2,
A = x*^2 - x^2 = w + x+^2 sin^2(phi) (w = x*^2 - x+^2), a = 1 - x^2 = s + A:

    T  = 2 sqrt(2) * int sqrt(2 a b / (s (A + w) + A w)) dphi,   b = s + w
    T' = sqrt(2)/hbar * int R(x) sqrt(2 a b / (s (A + w) + A w)) dphi
    R  = s^2 x^2 v(x) / (A^2 (a + s)^2),   v = a (4 - a) - 3 s^2
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import RangeError
from .model import ModelParams
from .numerics import QUAD_TOL, find_root, quad_regularized

# hbar-based entry points refuse levels this close (relatively) to the separatrix
SEPARATRIX_CUTOFF = 1e-12
_Z_RANGE = (-80.0, 120.0)


def _geometry(hbar: float, gap: float, params: ModelParams) -> tuple[float, float]:
    """(x+, w) with w = x*^2 - x+^2, each from the better-conditioned side."""
    xs2 = params.x_star**2
    if hbar <= 0.5 * params.hbar_star:
        # small root of X^2 - (1 - s^2 + 2 hbar) X + 2 hbar = 0
        b = params.stiffness + 2.0 * hbar
        xp2 = 4.0 * hbar / (b + math.sqrt(b * b - 8.0 * hbar))
        return math.sqrt(xp2), xs2 - xp2
    w = gap + math.sqrt(gap * gap + 2.0 * gap * params.s)
    return math.sqrt(xs2 - w), w


def _panel_edges(xp: float, w: float) -> list[float]:
    """Geometric panels towards phi = 0, where the integrand has width ~sqrt(w)/x+."""
    width = math.sqrt(w) / xp if xp > 0 else math.inf
    edges = []
    phi = 0.25 * math.pi
    while phi > 0.02 * width and phi > 1e-300:
        edges.append(phi)
        phi *= 0.5
    return edges


def _integrands(xp: float, w: float, params: ModelParams):
    s = params.s
    b = s + w

    def weight(phi):
        sp = np.sin(phi)
        big_a = w + xp * xp * sp * sp
        a = s + big_a
        return np.sqrt(2.0 * a * b / (s * (big_a + w) + big_a * w)), big_a, a

    def period_kernel(phi):
        return weight(phi)[0]

    def slope_kernel(phi):
        f, big_a, a = weight(phi)
        x = xp * np.cos(phi)
        v = a * (4.0 - a) - 3.0 * s * s
        return s * s * x * x * v / (big_a * big_a * (a + s) ** 2) * f

    return period_kernel, slope_kernel


def _level_from_hbar(hbar: float, params: ModelParams) -> tuple[float, float]:
    hs = params.hbar_star
    if not 0.0 < hbar < hs:
        raise RangeError(f"hbar={hbar!r} outside (0, hbar*={hs:.17g})")
    if hbar > hs * (1.0 - SEPARATRIX_CUTOFF):
        raise RangeError(
            f"hbar={hbar!r} within {SEPARATRIX_CUTOFF:g} (relative) of the separatrix; "
            "use the gap-based entry points"
        )
    return hbar, hs - hbar


def _level_from_gap(gap: float, params: ModelParams) -> tuple[float, float]:
    hs = params.hbar_star
    if not 0.0 < gap < hs:
        raise RangeError(f"gap={gap!r} outside (0, hbar*={hs:.17g})")
    return hs - gap, gap


def _period(hbar, gap, params, tol):
    xp, w = _geometry(hbar, gap, params)
    kernel, _ = _integrands(xp, w, params)
    return 2.0 * math.sqrt(2.0) * quad_regularized(kernel, tol, breakpoints=_panel_edges(xp, w))


def _period_derivative(hbar, gap, params, tol):
    xp, w = _geometry(hbar, gap, params)
    _, kernel = _integrands(xp, w, params)
    integral = quad_regularized(kernel, tol, breakpoints=_panel_edges(xp, w))
    return math.sqrt(2.0) / hbar * integral


def period(hbar: float, params: ModelParams, tol: float = QUAD_TOL) -> float:
    """Minimal period of the autonomous orbit at energy ``hbar`` in (0, hbar*)."""
    return _period(*_level_from_hbar(hbar, params), params, tol)


def period_from_gap(gap: float, params: ModelParams, tol: float = QUAD_TOL) -> float:
    """Minimal period at energy hbar* - gap."""
    return _period(*_level_from_gap(gap, params), params, tol)


def period_derivative(hbar: float, params: ModelParams, tol: float = QUAD_TOL) -> float:
    """dT/dhbar at ``hbar``; strictly positive."""
    return _period_derivative(*_level_from_hbar(hbar, params), params, tol)


def period_derivative_from_gap(gap: float, params: ModelParams, tol: float = QUAD_TOL) -> float:
    return _period_derivative(*_level_from_gap(gap, params), params, tol)


def slope_integrand(x, params: ModelParams):
    """Rational factor R(x) of the T' integrand (nonnegative inside the saddle loop)."""
    x = np.asarray(x, dtype=float)
    s = params.s
    big_a = (params.x_star - x) * (params.x_star + x)
    a = 1.0 - x * x
    v = a * (4.0 - a) - 3.0 * s * s
    return s * s * x * x * v / (big_a * big_a * (a + s) ** 2)


def _level_from_z(z: float, params: ModelParams) -> tuple[float, float]:
    # hbar = hbar* sigma(z), gap = hbar* sigma(-z): both sides keep relative precision
    hs = params.hbar_star
    if z >= 0:
        e = math.exp(-z)
        return hs / (1.0 + e), hs * e / (1.0 + e)
    e = math.exp(z)
    return hs * e / (1.0 + e), hs / (1.0 + e)


@dataclass(frozen=True)
class EnergyLevel:
    """An energy level inside the saddle loop, carried as (hbar, gap)."""

    hbar: float
    gap: float


def period_inverse_level(
    T_target: float, params: ModelParams, rel_tol: float = 1e-12
) -> EnergyLevel:
    """Energy level whose minimal period is ``T_target``.

    Bisection on z = log(hbar/gap), then one Newton polish with T'.
    """
    t_inf = params.linear_period
    if not T_target > t_inf:
        raise RangeError(f"T_target={T_target!r} must exceed the infimum {t_inf:.17g}")

    def resid(z):
        hb, g = _level_from_z(z, params)
        return _period(hb, g, params, QUAD_TOL) - T_target

    lo, hi = _Z_RANGE
    if resid(hi) < 0:
        raise RangeError(
            f"T_target={T_target!r} lies beyond the resolvable neighbourhood of the separatrix"
        )
    if resid(lo) > 0:
        raise RangeError(f"T_target={T_target!r} too close to the infimum {t_inf:.17g}")

    def slope(z):
        hb, g = _level_from_z(z, params)
        return _period_derivative(hb, g, params, QUAD_TOL) * hb * g / params.hbar_star

    z = find_root(resid, lo, hi, tol=1e-13 * max(1.0, abs(hi)), fprime=slope)
    hb, g = _level_from_z(z, params)
    return EnergyLevel(hb, g)


def period_inverse(T_target: float, params: ModelParams) -> float:
    """hbar with T(hbar) = T_target."""
    return period_inverse_level(T_target, params).hbar


def period_inverse_gap(T_target: float, params: ModelParams) -> float:
    """Gap hbar* - hbar with T = T_target; usable where hbar itself rounds to hbar*."""
    return period_inverse_level(T_target, params).gap


def period_at_level(level: EnergyLevel, params: ModelParams, tol: float = QUAD_TOL) -> float:
    return _period(level.hbar, level.gap, params, tol)


def period_derivative_at_level(
    level: EnergyLevel, params: ModelParams, tol: float = QUAD_TOL
) -> float:
    return _period_derivative(level.hbar, level.gap, params, tol)


def turning_point_at_level(level: EnergyLevel, params: ModelParams) -> float:
    return _geometry(level.hbar, level.gap, params)[0]


def max_p(m: int, params: ModelParams) -> int:
    """nu_m = floor(m Tv sqrt(1 - 4 beta V0^2) / (2 pi)); (m, p) admissible iff 1 <= p <= nu_m."""
    if m < 1:
        raise RangeError(f"m must be a positive integer (got {m})")
    return int(math.floor(m * params.Tv / params.linear_period))


@dataclass(frozen=True)
class PeriodPoint:
    hbar: float
    T: float
    dTdh: float
    x_plus: float
    dTdh_fd: float | None = None


def period_point(hbar: float, params: ModelParams, with_fd: bool = False) -> PeriodPoint:
    hb, g = _level_from_hbar(hbar, params)
    fd = period_derivative_fd(hbar, params) if with_fd else None
    return PeriodPoint(
        hbar=hb,
        T=_period(hb, g, params, QUAD_TOL),
        dTdh=_period_derivative(hb, g, params, QUAD_TOL),
        x_plus=_geometry(hb, g, params)[0],
        dTdh_fd=fd,
    )


def period_derivative_fd(
    hbar: float, params: ModelParams, low_step: float = 0.1, high_step: float = 1e-4
) -> float:
    """Centred difference of T, an oracle for ``period_derivative``.

    Below hbar*/2 the step is min(``low_step`` hbar, ``high_step`` hbar*): T
    is smooth on the scale hbar*, so near 0 only the domain limits the step.  Above it the difference is
    taken in the gap hbar* - hbar with step ``high_step * gap``: steps in hbar
    itself would be swamped by the rounding of hbar* - gap.
    """
    hs = params.hbar_star
    gap = hs - hbar
    if hbar <= gap:
        h = min(low_step * hbar, high_step * hs)
        return (period(hbar + h, params, tol=1e-14) - period(hbar - h, params, tol=1e-14)) / (2 * h)
    h = high_step * gap
    return (period_from_gap(gap - h, params, tol=1e-14) - period_from_gap(gap + h, params, tol=1e-14)) / (2 * h)


@dataclass
class TheoremCheck:
    name: str
    passed: bool
    max_violation: float
    detail: str = ""


@dataclass
class PeriodTheoremReport:
    grid: np.ndarray
    periods: np.ndarray
    slopes: np.ndarray
    slopes_fd: np.ndarray
    checks: list[TheoremCheck] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def summary(self) -> str:
        n_ok = sum(c.passed for c in self.checks)
        return f"{n_ok}/{len(self.checks)} properties pass"


def energy_grid(params: ModelParams, size: int, lo: float = 1e-6, hi: float = 1e-6) -> np.ndarray:
    """Log-spaced grid: relative energies from ``lo`` up to 1/2, then gaps down to ``hi``."""
    hs = params.hbar_star
    n_low = size // 2
    low = hs * np.logspace(math.log10(lo), math.log10(0.5), n_low, endpoint=False)
    high = hs - hs * np.logspace(math.log10(0.5), math.log10(hi), size - n_low)
    return np.concatenate([low, high])


def verify_period_theorem(
    params: ModelParams,
    grid_size: int = 100,
    fd_tol: float = 1e-6,
    limit_tol: float = 1e-4,
) -> PeriodTheoremReport:
    """Check the three properties of T(hbar) on a log-spaced energy grid.

    (i) T near hbar = 0 approaches 2 pi / sqrt(1 - 4 beta V0^2);
    (ii) T grows without bound as hbar -> hbar* (checked at gaps 1e-4 .. 1e-10);
    (iii) T' > 0 everywhere, agreeing with centered differences, and T increasing.
    """
    if grid_size < 10:
        raise RangeError("grid_size must be at least 10")
    hs = params.hbar_star
    grid = energy_grid(params, grid_size)
    periods = np.array([period(h, params) for h in grid])
    slopes = np.array([period_derivative(h, params) for h in grid])
    slopes_fd = np.array([period_derivative_fd(h, params) for h in grid])
    checks = []

    t_small = period(1e-10 * hs, params)
    err = abs(t_small - params.linear_period)
    checks.append(
        TheoremCheck(
            "(i) small-energy limit",
            err <= limit_tol,
            err,
            f"T(1e-10 hbar*) = {t_small:.12f}, limit {params.linear_period:.12f}",
        )
    )

    near = [period(hs * (1.0 - 10.0**-k), params) for k in (4, 6, 8, 10)]
    growth = np.diff(near)
    ok_growth = bool(np.all(growth > 0) and near[-1] > 3.0 * params.linear_period)
    checks.append(
        TheoremCheck(
            "(ii) divergence at the separatrix",
            ok_growth,
            float(max(0.0, -growth.min(), 3.0 * params.linear_period - near[-1])),
            "T at gaps 1e-4,1e-6,1e-8,1e-10 (relative): " + ", ".join(f"{t:.6f}" for t in near),
        )
    )

    rel = np.abs(slopes - slopes_fd) / np.abs(slopes_fd)
    mono = np.diff(periods)
    ok3 = bool(np.all(slopes > 0) and np.all(rel <= fd_tol) and np.all(mono > 0))
    checks.append(
        TheoremCheck(
            "(iii) T' > 0",
            ok3,
            float(max(rel.max() if rel.size else 0.0, 0.0 if slopes.min() > 0 else -slopes.min())),
            f"min T' = {slopes.min():.6e}, max |T' - FD|/|FD| = {rel.max():.3e}, "
            f"min dT on grid = {mono.min():.3e}",
        )
    )
    return PeriodTheoremReport(grid, periods, slopes, slopes_fd, checks)
