"""Forced (delta > 0) symmetric periodic solutions by anchored two-segment shooting.

The forced equation is odd in x and even in t, so with L = m Tv / 2

* a solution with x(0) = 0 and x(L) = 0 is odd and m Tv-periodic;
* a solution with x'(0) = 0 and x'(L) = 0 is even and m Tv-periodic.

Near the separatrix a single shot from t = 0 loses the orbit: the flow
shears by up to 1e11 over half a period.  Instead the unknowns sit at
turning points, where the offset chart z = x* - |x| keeps full precision,
and integration always runs away from them:

* odd: anchor (z1, v1) at t1 = L / (2p), segments t1 -> 0 and t1 -> L,
  residuals x(0) and x(L);
* even: anchors z0 at t = 0 and zL at t = L (both with x' = 0), segments
  0 -> L/2 and L -> L/2, residuals the mismatch at L/2.

The trace of the monodromy follows from the segment matrices without
forming the full product.  Families in delta are traced by a linear
predictor on the anchors plus a Newton corrector.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import IO, Iterable, Sequence

import numpy as np

from .errors import CombDriveError, ConvergenceError, RangeError
from .hill import (
    ChartFlow,
    chart_flow,
    chart_of,
    even_segment_trace,
    from_chart,
    monodromy,
    odd_segment_trace,
    to_chart,
)
from .model import DriveSpec, ModelParams
from .orbits import EVEN, ODD, check_admissible, even_orbit, odd_orbit, orbit_saddle_offset

__all__ = [
    "DEFAULT_DELTA_GRID",
    "Anchor",
    "ForcedOrbit",
    "Family",
    "autonomous_anchor",
    "shoot_odd",
    "shoot_even",
    "shoot",
    "continue_family",
    "trace_slope_fd",
    "trace_slope",
    "SlopeEstimate",
    "family_records",
    "write_jsonl",
    "read_jsonl",
]

DEFAULT_DELTA_GRID = (0.0, 1e-4, 2e-4, 5e-4, 1e-3, 2e-3, 5e-3, 1e-2)
SHOOT_TOL = 1e-10
MAX_ITER = 40


@dataclass(frozen=True)
class Anchor:
    """Shooting unknowns.

    odd: chart and offset z of x(t1) plus the velocity v at t1.
    even: charts and offsets of x(0) and x(L); velocities are zero there.
    """

    chart: int
    z: float
    second: float  # odd: v(t1); even: offset of x(L)
    chart_b: int = 0  # even only: chart of x(L)


@dataclass(frozen=True)
class ForcedOrbit:
    """Symmetric m Tv-periodic solution of the forced equation."""

    symmetry: str
    m: int
    p: int
    delta: float
    init: float
    shooting_residual: float
    trace: float
    return_residual: float
    iterations: int
    anchor: Anchor
    trace_direct: float | None = None

    @property
    def initial_state(self) -> tuple[float, float]:
        return (0.0, self.init) if self.symmetry == ODD else (self.init, 0.0)


@dataclass(frozen=True)
class Family:
    symmetry: str
    m: int
    p: int
    members: tuple[ForcedOrbit, ...]
    aborted_at: float | None = None
    reason: str = ""

    @property
    def complete(self) -> bool:
        return self.aborted_at is None

    @property
    def deltas(self) -> np.ndarray:
        return np.array([o.delta for o in self.members])

    @property
    def traces(self) -> np.ndarray:
        return np.array([o.trace for o in self.members])


def _dx_dz(chart: int) -> float:
    return 1.0 if chart == 0 else -float(chart)


def _half(m: int, params: ModelParams) -> float:
    return 0.5 * m * params.Tv


def autonomous_anchor(symmetry: str, m: int, p: int, params: ModelParams) -> Anchor:
    """Anchor of the delta = 0 orbit, taken from its exact turning point."""
    orbit = (odd_orbit if symmetry == ODD else even_orbit)(m, p, params)
    xp = orbit.x_plus
    chart = chart_of(xp, params)
    z = orbit_saddle_offset(orbit) if chart else xp
    if symmetry == ODD:
        return Anchor(chart, z, 0.0)
    sigma = -1 if p % 2 else 1
    return Anchor(chart, z, z, sigma * chart)


def _segments(symmetry, m, p, drive, params, anc: Anchor) -> tuple[ChartFlow, ChartFlow]:
    L = _half(m, params)
    if symmetry == ODD:
        t1 = L / (2 * p)
        back = chart_flow(anc.chart, anc.z, anc.second, t1, 0.0, drive, params)
        fwd = chart_flow(anc.chart, anc.z, anc.second, t1, L, drive, params)
        return back, fwd
    mid = 0.5 * L
    left = chart_flow(anc.chart, anc.z, 0.0, 0.0, mid, drive, params)
    right = chart_flow(anc.chart_b, anc.second, 0.0, L, mid, drive, params)
    return left, right


def _residual(symmetry, anc: Anchor, a: ChartFlow, b: ChartFlow) -> tuple[np.ndarray, np.ndarray]:
    if symmetry == ODD:
        k = _dx_dz(anc.chart)
        r = np.array([a.x, b.x])
        J = np.array([[a.phi[0, 0] * k, a.phi[0, 1]], [b.phi[0, 0] * k, b.phi[0, 1]]])
        return r, J
    ka, kb = _dx_dz(anc.chart), _dx_dz(anc.chart_b)
    if a.chart == b.chart:  # compare in the shared chart, exact near a turning point
        za, zb, cz = a.z, b.z, _dx_dz(a.chart)
    else:
        za, zb, cz = a.x, b.x, 1.0
    r = np.array([za - zb, a.v - b.v])
    J = np.array(
        [
            [cz * a.phi[0, 0] * ka, -cz * b.phi[0, 0] * kb],
            [a.phi[1, 0] * ka, -b.phi[1, 0] * kb],
        ]
    )
    return r, J


def _apply(anc: Anchor, dz: np.ndarray) -> Anchor:
    return Anchor(anc.chart, anc.z + dz[0], anc.second + dz[1], anc.chart_b)


def _solve(symmetry, m, p, drive, params, anc: Anchor, tol: float, max_iter: int):
    """Damped Newton on the two anchor unknowns."""

    def evaluate(a: Anchor):
        s1, s2 = _segments(symmetry, m, p, drive, params, a)
        r, J = _residual(symmetry, a, s1, s2)
        return s1, s2, r, J

    s1, s2, r, J = evaluate(anc)
    its = 0
    while np.max(np.abs(r)) > tol and its < max_iter:
        its += 1
        try:
            step = -np.linalg.solve(J, r)
        except np.linalg.LinAlgError:
            break
        if not np.all(np.isfinite(step)):
            break
        norm = np.max(np.abs(r))
        for _ in range(40):
            trial = _apply(anc, step)
            try:
                t1, t2, r_new, J_new = evaluate(trial)
                ok = np.max(np.abs(r_new)) < norm
            except CombDriveError:
                ok = False
            if ok:
                break
            step = 0.5 * step
        else:
            break  # no decrease along the Newton direction: at the rounding floor
        anc, s1, s2, r, J = trial, t1, t2, r_new, J_new
    res = float(np.max(np.abs(r)))
    if res <= tol:
        return anc, s1, s2, res, its
    raise ConvergenceError(f"shooting stalled after {its} iterations at residual {res:.3e} (tol {tol:.1e})")


def shoot(
    symmetry: str,
    m: int,
    p: int,
    delta: float,
    guess: float | Anchor | None,
    params: ModelParams,
    tol: float = SHOOT_TOL,
    max_iter: int = MAX_ITER,
    with_direct: bool = False,
) -> ForcedOrbit:
    """Symmetric (m, p) orbit at ``delta``.

    ``guess`` is the initial value (eta for odd, xi for even), an anchor,
    or None for the autonomous orbit.
    """
    check_admissible(m, p, params)
    if symmetry not in (ODD, EVEN):
        raise ValueError(f"symmetry must be {ODD!r} or {EVEN!r}")
    drive = DriveSpec(delta).validate(params)
    anc = _anchor_from_guess(symmetry, m, p, drive, params, guess)
    anc, s1, s2, res, its = _solve(symmetry, m, p, drive, params, anc, tol, max_iter)
    if symmetry == ODD:
        trace = odd_segment_trace(s1, s2)
        init = s1.v
    else:
        trace = even_segment_trace(s1, s2)
        init = from_chart(anc.z, anc.chart, params)
    L = _half(m, params)
    t0 = L / (2 * p) if symmetry == ODD else 0.0
    v0 = anc.second if symmetry == ODD else 0.0
    end = chart_flow(anc.chart, anc.z, v0, t0, t0 + 2.0 * L, drive, params)
    dz = end.z - anc.z if end.chart == anc.chart else end.x - from_chart(anc.z, anc.chart, params)
    ret = math.hypot(dz, end.v - v0)
    direct = None
    if with_direct:
        state = (0.0, init) if symmetry == ODD else (init, 0.0)
        try:
            direct = monodromy(state, drive, params, m).trace
        except CombDriveError:
            direct = None
    return ForcedOrbit(symmetry, m, p, float(delta), float(init), res, float(trace), ret, its, anc, direct)


def _anchor_from_guess(symmetry, m, p, drive, params, guess) -> Anchor:
    if guess is None:
        return autonomous_anchor(symmetry, m, p, params)
    if isinstance(guess, Anchor):
        return guess
    g = float(guess)
    if symmetry == ODD:
        t1 = _half(m, params) / (2 * p)
        at = chart_flow(0, 0.0, g, 0.0, t1, drive, params)
        return Anchor(at.chart, at.z, at.v)
    chart = chart_of(g, params)
    sigma = -1 if p % 2 else 1
    z = to_chart(g, chart, params)
    return Anchor(chart, z, z, sigma * chart)


def shoot_odd(m, p, delta, guess, params, tol=SHOOT_TOL, max_iter=MAX_ITER) -> ForcedOrbit:
    """Odd orbit: x(0) = 0 = x(m Tv / 2); ``init`` is eta = x'(0)."""
    return shoot(ODD, m, p, delta, guess, params, tol, max_iter)


def shoot_even(m, p, delta, guess, params, tol=SHOOT_TOL, max_iter=MAX_ITER) -> ForcedOrbit:
    """Even orbit: x'(0) = 0 = x'(m Tv / 2); ``init`` is xi = x(0)."""
    return shoot(EVEN, m, p, delta, guess, params, tol, max_iter)


def _validate_grid(delta_grid: Sequence[float], params: ModelParams) -> list[float]:
    grid = [float(d) for d in delta_grid]
    if not grid or grid[0] != 0.0:
        raise RangeError("delta grid must start at 0")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise RangeError("delta grid must be strictly increasing")
    DriveSpec(grid[-1]).validate(params)
    return grid


def _predict(members: list[ForcedOrbit], delta: float) -> Anchor | None:
    if not members:
        return None
    b = members[-1].anchor
    if len(members) < 2 or members[-2].anchor.chart != b.chart or members[-2].anchor.chart_b != b.chart_b:
        return b
    a = members[-2].anchor
    w = (delta - members[-1].delta) / (members[-1].delta - members[-2].delta)
    return Anchor(b.chart, b.z + w * (b.z - a.z), b.second + w * (b.second - a.second), b.chart_b)


def continue_family(
    m: int,
    p: int,
    symmetry: str,
    delta_grid: Sequence[float] = DEFAULT_DELTA_GRID,
    params: ModelParams | None = None,
    tol: float = SHOOT_TOL,
    with_direct: bool = False,
) -> Family:
    """Trace the (m, p) family from the autonomous orbit along ``delta_grid``.

    Stops cleanly at the first delta where shooting fails, keeping the
    members found so far.
    """
    params = params or ModelParams()
    grid = _validate_grid(delta_grid, params)
    check_admissible(m, p, params)
    members: list[ForcedOrbit] = []
    for delta in grid:
        try:
            guess = _predict(members, delta)
            members.append(shoot(symmetry, m, p, delta, guess, params, tol, with_direct=with_direct))
        except CombDriveError as exc:
            return Family(symmetry, m, p, tuple(members), delta, str(exc))
    return Family(symmetry, m, p, tuple(members))


def _three_point(d1: float, d2: float, t0: float, t1: float, t2: float) -> float:
    """Slope at 0 of the quadratic through (0, t0), (d1, t1), (d2, t2)."""
    return -t0 * (1.0 / d1 + 1.0 / d2) + t1 * d2 / (d1 * (d2 - d1)) - t2 * d1 / (d2 * (d2 - d1))


def trace_slope_fd(family: Family) -> float:
    """d tau / d delta at 0 from the quadratic through the three smallest deltas.

    With deltas {0, h, 2h} this is (4 tau(h) - tau(2h) - 3 tau(0)) / (2h).
    """
    pts = sorted((o.delta, o.trace) for o in family.members)
    if len(pts) < 3 or pts[0][0] != 0.0:
        raise RangeError("need the delta = 0 member and two more")
    (_, t0), (d1, t1), (d2, t2) = pts[:3]
    return _three_point(d1, d2, t0, t1, t2)


@dataclass(frozen=True)
class SlopeEstimate:
    value: float
    step: float
    change: float  # relative change from the previous (4x larger) step
    steps: tuple[float, ...]
    values: tuple[float, ...]


def trace_slope(
    symmetry: str,
    m: int,
    p: int,
    params: ModelParams | None = None,
    start: float = 1e-4,
    factor: float = 4.0,
    rel_tol: float = 1e-3,
    min_step: float = 1e-14,
) -> SlopeEstimate:
    """d tau / d delta at 0 by the {0, h, 2h} quadratic with h chosen from the data.

    h shrinks by ``factor`` from ``start`` until two successive estimates
    agree to ``rel_tol``.  Families close to the separatrix only exist for
    tiny delta, and their trace curves bend sharply, so no fixed h works
    for all (m, p).
    """
    params = params or ModelParams()
    base = shoot(symmetry, m, p, 0.0, None, params)
    steps: list[float] = []
    values: list[float] = []
    h = start
    change = math.inf
    while h >= min_step:
        try:
            o1 = shoot(symmetry, m, p, h, base.anchor, params)
            o2 = shoot(symmetry, m, p, 2 * h, o1.anchor, params)
        except CombDriveError:
            h /= factor
            continue
        values.append(_three_point(h, 2 * h, base.trace, o1.trace, o2.trace))
        steps.append(h)
        if len(values) >= 2:
            change = abs(values[-1] / values[-2] - 1.0)
            if change <= rel_tol:
                break
        h /= factor
    if not values:
        raise ConvergenceError(f"no forced ({m}, {p}) {symmetry} orbit found for delta >= {min_step:g}")
    return SlopeEstimate(values[-1], steps[-1], change, tuple(steps), tuple(values))


def family_records(family: Family) -> list[dict]:
    rows = []
    for o in family.members:
        rows.append(
            {
                "symmetry": o.symmetry,
                "m": o.m,
                "p": o.p,
                "delta": o.delta,
                "init": o.init,
                "trace": o.trace,
                "residuals": {"shooting": o.shooting_residual, "return": o.return_residual},
            }
        )
    return rows


def write_jsonl(records: Iterable[dict], fh: IO[str]) -> None:
    for rec in records:
        fh.write(json.dumps(rec, sort_keys=True) + "\n")


def read_jsonl(fh: IO[str]) -> list[dict]:
    return [json.loads(line) for line in fh if line.strip()]
