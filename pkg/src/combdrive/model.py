"""Nondimensional comb-drive finger actuator.

The finger displacement obeys

    x'' + x * (1 - 4*beta*V(t)**2 / (1 - x**2)**2) = 0,    |x| < 1,

driven by the voltage V(t) = V0 + delta*P(t).  Everything near the outer
saddles is written in factored form: with s = 2*V0*sqrt(beta) = 1 - x*^2,

    1 - s**2/(1-x**2)**2 = (x*^2 - x^2) (1 - x^2 + s) / (1 - x^2)**2

so the autonomous force and the energy gap to the separatrix keep full
relative precision right up to the saddle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DomainError, RangeError

__all__ = [
    "ModelParams",
    "CosineProfile",
    "DriveSpec",
    "force",
    "dforce_dx",
    "autonomous_force",
    "energy",
    "energy_gap",
    "hamiltonian",
    "equilibria",
    "Equilibria",
    "turning_point",
    "turning_point_from_gap",
]


@dataclass(frozen=True)
class ModelParams:
    """Physical constants of the actuator (nondimensional form).

    Construction fails outside the stable regime ``0 < V0 < 1/(2 sqrt(beta))``.
    """

    beta: float = 0.25
    V0: float = 0.5
    Tv: float = 2.0 * math.pi

    def __post_init__(self):
        if not (self.beta > 0 and self.V0 > 0 and self.Tv > 0):
            raise DomainError(
                f"beta, V0, Tv must be positive (got {self.beta}, {self.V0}, {self.Tv})"
            )
        if not self.V0 < self.v_star:
            raise DomainError(
                f"V0={self.V0} is at or above the pull-in voltage V*={self.v_star:.12g}"
            )

    @property
    def omega0(self) -> float:
        return 2.0 * math.pi / self.Tv

    @property
    def v_star(self) -> float:
        return 1.0 / (2.0 * math.sqrt(self.beta))

    @property
    def s(self) -> float:
        """2*V0*sqrt(beta); equals 1 - x*^2 and sqrt(4 beta V0^2)."""
        return 2.0 * self.V0 * math.sqrt(self.beta)

    @property
    def stiffness(self) -> float:
        """Linear stiffness at the origin, 1 - 4 beta V0^2."""
        return (1.0 - self.s) * (1.0 + self.s)

    @property
    def x_star(self) -> float:
        return math.sqrt(1.0 - self.s)

    @property
    def hbar_star(self) -> float:
        # E(x*) = (1 - s)^2 / 2 = x*^4 / 2
        return 0.5 * (1.0 - self.s) ** 2

    @property
    def linear_period(self) -> float:
        """Small-amplitude limit of the period function."""
        return 2.0 * math.pi / math.sqrt(self.stiffness)

    @property
    def saddle_rate(self) -> float:
        """Unstable eigenvalue at the saddles, sqrt(-f'(x*))."""
        return 2.0 * math.sqrt((1.0 - self.s) / self.s)


@dataclass(frozen=True)
class CosineProfile:
    """P(t) = cos(omega0 t): even, zero mean, minimum -1."""

    omega0: float

    name = "cosine"

    def value(self, t):
        return np.cos(self.omega0 * t)

    def rate(self, t):
        return -self.omega0 * np.sin(self.omega0 * t)

    def curvature(self, t):
        return -self.omega0**2 * np.cos(self.omega0 * t)

    @property
    def minimum(self) -> float:
        return -1.0


@dataclass(frozen=True)
class DriveSpec:
    """Voltage drive V(t) = V0 + delta * P(t)."""

    delta: float = 0.0
    profile: CosineProfile | None = None

    def bind(self, params: ModelParams) -> "DriveSpec":
        """Return a copy with the default cosine profile at the model's frequency."""
        if self.profile is not None:
            return self
        return DriveSpec(self.delta, CosineProfile(params.omega0))

    def max_delta(self, params: ModelParams) -> float:
        return -params.V0 / self._profile(params).minimum

    def validate(self, params: ModelParams) -> "DriveSpec":
        bound = self.max_delta(params)
        if not 0.0 <= self.delta < bound:
            raise RangeError(f"delta={self.delta} outside [0, {bound:.12g})")
        return self.bind(params)

    def voltage(self, t, params: ModelParams):
        if self.delta == 0.0:
            return params.V0 + 0.0 * np.asarray(t, dtype=float)
        return params.V0 + self.delta * self._profile(params).value(t)

    def _profile(self, params: ModelParams):
        return self.profile if self.profile is not None else CosineProfile(params.omega0)


_AUTONOMOUS = DriveSpec()


def _check_domain(x):
    xa = np.asarray(x, dtype=float)
    if np.any(np.abs(xa) >= 1.0) or np.any(~np.isfinite(xa)):
        raise DomainError(f"displacement must satisfy |x| < 1 (got {x!r})")
    return xa


def autonomous_force(x, params: ModelParams):
    """f(x) = F(x, t, 0) in factored form (no domain check; hot path)."""
    x2 = x * x
    a = 1.0 - x2
    xs = params.x_star
    return x * ((xs - x) * (xs + x)) * (a + params.s) / (a * a)


def force(x, t, params: ModelParams, drive: DriveSpec = _AUTONOMOUS):
    """F(x, t, delta) = x (1 - 4 beta V(t)^2 / (1 - x^2)^2).

    Raises DomainError when |x| >= 1.
    """
    x = _check_domain(x)
    if drive.delta == 0.0:
        return autonomous_force(x, params)
    # sigma = 2 sqrt(beta) V(t); a - sigma = (x*^2 - x^2) - s*delta*P/V0
    xs, s = params.x_star, params.s
    p = drive._profile(params).value(t)
    a = 1.0 - x * x
    ratio = drive.delta * p / params.V0
    return x * ((xs - x) * (xs + x) - s * ratio) * (a + s * (1.0 + ratio)) / (a * a)


def dforce_dx(x, t, params: ModelParams, drive: DriveSpec = _AUTONOMOUS):
    """Partial derivative of F in x: 1 - 4 beta V^2 (1 + 3x^2) / (1 - x^2)^3."""
    x = _check_domain(x)
    v = drive.voltage(t, params)
    a = 1.0 - x * x
    return 1.0 - 4.0 * params.beta * v * v * (1.0 + 3.0 * x * x) / a**3


def energy(x, params: ModelParams):
    """Potential E(x) = x^2/2 - 2 beta V0^2/(1 - x^2) + 2 beta V0^2.

    Evaluated as x^2 (1 - x^2 - s^2) / (2 (1 - x^2)), which is exact near 0.
    """
    x = _check_domain(x)
    a = 1.0 - x * x
    return x * x * (a - params.s**2) / (2.0 * a)


def energy_gap(x, params: ModelParams):
    """hbar* - E(x) = (x*^2 - x^2)^2 / (2 (1 - x^2)); exact near the saddles."""
    x = _check_domain(x)
    xs = params.x_star
    w = (xs - x) * (xs + x)
    return w * w / (2.0 * (1.0 - x * x))


def hamiltonian(x, xdot, params: ModelParams):
    return 0.5 * np.asarray(xdot, dtype=float) ** 2 + energy(x, params)


@dataclass(frozen=True)
class Equilibria:
    points: tuple[tuple[float, str], ...]
    pull_in_voltage: float
    pull_in: bool


def equilibria(beta: float, V0: float) -> Equilibria:
    """Equilibria of the autonomous field on (-1, 1).

    Takes raw constants rather than ModelParams so that the pull-in side of
    the boundary can be reported instead of rejected.
    """
    v_star = 1.0 / (2.0 * math.sqrt(beta))
    if V0 >= v_star:
        return Equilibria(((0.0, "center"),), v_star, True)
    xs = math.sqrt(1.0 - 2.0 * V0 * math.sqrt(beta))
    pts = ((-xs, "saddle"), (0.0, "center"), (xs, "saddle"))
    return Equilibria(pts, v_star, False)


def turning_point_from_gap(gap: float, params: ModelParams) -> float:
    """Positive root of E(x) = hbar* - gap, in closed form.

    From (x*^2 - x^2)^2 = 2 gap (1 - x^2): with w = x*^2 - x^2,
    w^2 - 2 gap w - 2 gap s = 0.
    """
    if not 0.0 <= gap <= params.hbar_star:
        raise RangeError(f"gap={gap} outside [0, hbar*]")
    w = gap + math.sqrt(gap * gap + 2.0 * gap * params.s)
    return math.sqrt(max(params.x_star**2 - w, 0.0))


def saddle_offset_from_gap(gap: float, params: ModelParams) -> float:
    """x* - x+ without cancellation."""
    w = gap + math.sqrt(gap * gap + 2.0 * gap * params.s)
    xp = math.sqrt(max(params.x_star**2 - w, 0.0))
    return w / (params.x_star + xp)


def turning_point(hbar: float, params: ModelParams, tol: float = 1e-13) -> float:
    """x+(hbar): unique root of E(x) = hbar on (0, x*].

    Bisection on the monotone energy followed by one Newton step.
    """
    from .numerics import find_root

    hs = params.hbar_star
    if not 0.0 < hbar <= hs:
        raise RangeError(f"hbar={hbar} outside (0, hbar*={hs:.16g}]")
    xs = params.x_star
    if hbar == hs:
        return xs
    gap = hs - hbar
    # near the saddle the gap carries the precision, near 0 the energy does
    if hbar > 0.5 * hs:
        g: Callable[[float], float] = lambda x: gap - float(energy_gap(x, params))
    else:
        g = lambda x: float(energy(x, params)) - hbar
    return find_root(
        g, 0.0, xs, tol=tol, fprime=lambda x: float(autonomous_force(x, params))
    )
