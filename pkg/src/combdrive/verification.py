"""End-to-end checks of the package's numerical claims at a given parameter set.

Each ``criterion_k`` returns a ``CriterionResult`` with the measured
quantities; nothing is raised for a failed property.  Used by the ``verify``
subcommand and by the acceptance tests.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .continuation import DEFAULT_DELTA_GRID, continue_family, trace_slope
from .errors import CombDriveError
from .firstorder import (
    convexity_certificate,
    frequency_condition,
    predict_stability,
    tau_prime_even,
    tau_prime_odd,
)
from .hill import autonomous_trace, classify
from .model import ModelParams
from .orbits import EVEN, ODD, count_zeros, even_orbit, odd_orbit, sample_orbit, symmetry_residuals
from .period import energy_grid, max_p, period, period_derivative, period_derivative_fd

__all__ = ["CriterionResult", "CRITERIA", "run_criterion", "run_all", "admissible_pairs"]


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    details: list[str] = field(default_factory=list)
    measured: dict = field(default_factory=dict)
    runtime: float = 0.0
    time_limit: float | None = None

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"criterion {self.number:2d} {status}  {self.title}  ({self.runtime:.1f} s)"

    def record(self) -> dict:
        return {
            "criterion": self.number,
            "title": self.title,
            "passed": self.passed,
            "runtime": round(self.runtime, 3),
            "measured": self.measured,
            "details": self.details,
        }


def admissible_pairs(m_max: int, params: ModelParams) -> list[tuple[int, int]]:
    return [(m, p) for m in range(1, m_max + 1) for p in range(1, max_p(m, params) + 1)]


def _orbits(m_max: int, params: ModelParams):
    for m, p in admissible_pairs(m_max, params):
        yield odd_orbit(m, p, params)
        yield even_orbit(m, p, params)


def _tag(o) -> str:
    return f"({o.m},{o.p}) {o.symmetry}"


def criterion_1(params: ModelParams) -> CriterionResult:
    T = period(1e-10 * params.hbar_star, params)
    err = abs(T - params.linear_period)
    r = CriterionResult(1, "period infimum", err <= 1e-4, time_limit=1.0)
    r.details.append(f"T(1e-10 hbar*) = {T:.12f}, limit {params.linear_period:.12f}, |diff| = {err:.3e}")
    r.measured = {"T": T, "limit": params.linear_period, "abs_error": err}
    return r


def criterion_2(params: ModelParams) -> CriterionResult:
    hs = params.hbar_star
    Ts = [period(hs * (1.0 - 10.0**-k), params) for k in (4, 6, 8, 10)]
    increasing = all(b > a for a, b in zip(Ts, Ts[1:]))
    ratio = Ts[-1] / params.linear_period
    r = CriterionResult(2, "period divergence", increasing and ratio > 3.0, time_limit=5.0)
    r.details.append("T at relative gaps 1e-4,1e-6,1e-8,1e-10: " + ", ".join(f"{t:.6f}" for t in Ts))
    r.details.append(f"T(1e-10 gap) / infimum = {ratio:.4f}")
    r.measured = {"T": Ts, "ratio": ratio}
    return r


def criterion_3(params: ModelParams) -> CriterionResult:
    grid = energy_grid(params, 100)
    d = np.array([period_derivative(h, params) for h in grid])
    fd = np.array([period_derivative_fd(h, params) for h in grid])
    rel = np.abs(d - fd) / np.abs(fd)
    ok = bool(np.all(d > 0) and np.all(rel <= 1e-6))
    r = CriterionResult(3, "period monotonicity", ok, time_limit=10.0)
    r.details.append(f"min T' = {d.min():.6g}, max rel diff to centred FD = {rel.max():.3e} over 100 energies")
    r.measured = {"min_dT": float(d.min()), "max_rel_fd": float(rel.max())}
    return r


def criterion_4(params: ModelParams) -> CriterionResult:
    r = CriterionResult(4, "orbit construction (m <= 5)", True, time_limit=30.0)
    worst = {"residual": 0.0, "energy_drift": 0.0, "period_error": 0.0}
    for o in _orbits(5, params):
        res = symmetry_residuals(o)
        traj = sample_orbit(o, 2, periods=o.p)
        zeros = count_zeros(traj, (0.0, o.m * params.Tv))
        bad = []
        if res.max_residual() > 1e-8:
            bad.append(f"symmetry residual {res.max_residual():.2e}")
        if zeros != 2 * o.p:
            bad.append(f"{zeros} zeros, expected {2 * o.p}")
        if res.energy_drift > 1e-9:
            bad.append(f"energy drift {res.energy_drift:.2e}")
        if res.period_error > 1e-9:
            bad.append(f"period error {res.period_error:.2e}")
        worst["residual"] = max(worst["residual"], res.max_residual())
        worst["energy_drift"] = max(worst["energy_drift"], res.energy_drift)
        worst["period_error"] = max(worst["period_error"], res.period_error)
        status = "ok" if not bad else "; ".join(bad)
        r.details.append(
            f"{_tag(o)}: residual {res.max_residual():.1e}, zeros {zeros}, drift {res.energy_drift:.1e},"
            f" period err {res.period_error:.1e}: {status}"
        )
        r.passed &= not bad
    r.measured = worst
    return r


TRACE_DIGITS = 30


def criterion_5(params: ModelParams) -> CriterionResult:
    """Judged on the 30-digit quarter trace; the float64 value is reported beside it."""
    r = CriterionResult(5, "autonomous trace equals 2", True)
    worst = worst64 = 0.0
    for o in _orbits(5, params):
        est = autonomous_trace(o, digits=TRACE_DIGITS)
        f64 = autonomous_trace(o)
        err = abs(est.trace - 2.0)
        worst, worst64 = max(worst, err), max(worst64, abs(f64.trace - 2.0))
        ok = err <= 1e-6
        r.passed &= ok
        r.details.append(
            f"{_tag(o)}: tau - 2 = {est.trace - 2.0:+.3e} ({TRACE_DIGITS} digits),"
            f" {f64.trace - 2.0:+.3e} (float64, wronskian err {f64.wronskian_error:.1e})"
            + ("" if ok else "  FAIL")
        )
    r.measured = {"max_abs_error": worst, "max_abs_error_float64": worst64}
    return r


def criterion_6(params: ModelParams) -> CriterionResult:
    r = CriterionResult(6, "cross-method tau'(0)", True)
    worst_methods = worst_shift = 0.0
    for n in range(1, 5):
        odd = tau_prime_odd(2 * n, 1, params)
        even = tau_prime_even(2 * n, 1, params)
        dm = max(odd.max_rel_disagreement, even.max_rel_disagreement)
        shift = abs(even.value - (-1) ** n * odd.value) / abs(odd.value)
        worst_methods, worst_shift = max(worst_methods, dm), max(worst_shift, shift)
        ok = dm <= 1e-8 and shift <= 1e-8
        r.passed &= ok
        r.details.append(
            f"n={n}: tau' = {odd.value:.10e}, methods disagree {dm:.1e}, shift identity {shift:.1e}"
            + ("" if ok else "  FAIL")
        )
    r.measured = {"max_method_disagreement": worst_methods, "max_shift_error": worst_shift}
    return r


def criterion_7(params: ModelParams) -> CriterionResult:
    expected = {1: -1, 2: 1, 3: -1, 4: 1}
    r = CriterionResult(7, "odd sign pattern -,+,-,+", True)
    signs = {}
    for n, want in expected.items():
        tp = tau_prime_odd(2 * n, 1, params)
        got = int(np.sign(tp.value))
        freq = frequency_condition(n, params)
        signs[n] = got
        ok = got == want and freq
        r.passed &= ok
        r.details.append(
            f"n={n}: tau' = {tp.value:+.6e} (expected sign {'+' if want > 0 else '-'}),"
            f" frequency condition {'holds' if freq else 'fails'}" + ("" if ok else "  FAIL")
        )
    r.measured = {"signs": signs}
    return r


def criterion_8(params: ModelParams) -> CriterionResult:
    r = CriterionResult(8, "even orbits have positive tau'", True)
    vals = {}
    for n in range(1, 5):
        tp = tau_prime_even(2 * n, 1, params)
        vals[n] = tp.value
        ok = tp.value > 0
        r.passed &= ok
        r.details.append(f"n={n}: tau' = {tp.value:+.6e}" + ("" if ok else "  FAIL"))
    r.measured = {"tau_prime": vals}
    return r


def criterion_9(params: ModelParams) -> CriterionResult:
    r = CriterionResult(9, "delicate orbits have tau'(0) = 0", True)
    worst = 0.0
    for m, p in admissible_pairs(5, params):
        if m % (2 * p) == 0:
            continue
        for fn in (tau_prime_odd, tau_prime_even):
            tp = fn(m, p, params)
            worst = max(worst, tp.relative_size)
            ok = tp.relative_size <= 1e-8
            r.passed &= ok
            r.details.append(f"({m},{p}) {tp.symmetry}: |tau'| / scale = {tp.relative_size:.2e}" + ("" if ok else "  FAIL"))
    r.measured = {"max_relative_size": worst}
    return r


def criterion_10(params: ModelParams) -> CriterionResult:
    r = CriterionResult(10, "convexity certificate", True)
    for n in range(1, 5):
        rep = convexity_certificate(n, params)
        r.passed &= rep.passed
        r.details.append(
            f"n={n}: min U = {rep.u_min:.4g} at Y={rep.u_argmin:.4f} ({rep.u_negative_count}/1000 <= 0),"
            f" U(0) err {abs(rep.u_at_0 - 20 * params.beta * params.V0**2):.1e},"
            f" U(1) err {abs(rep.u_at_1 - 2 * rep.hbar):.1e}, y1 err {rep.y1_error:.2e}"
        )
        r.details.extend(f"    violation: {v}" for v in rep.violations)
    return r


FAMILIES = ((2, 1, ODD), (2, 1, EVEN), (4, 1, ODD), (4, 1, EVEN))


def criterion_11(params: ModelParams) -> CriterionResult:
    r = CriterionResult(11, "finite-difference slope matches tau'(0)", True, time_limit=120.0)
    for m, p, sym in FAMILIES:
        ref = (tau_prime_odd if sym == ODD else tau_prime_even)(m, p, params).value
        try:
            est = trace_slope(sym, m, p, params, start=1e-4)
        except CombDriveError as exc:
            r.passed = False
            r.details.append(f"({m},{p}) {sym}: no slope ({exc})  FAIL")
            continue
        rel = abs(est.value / ref - 1.0)
        ok = rel <= 0.01 and 2.0 * est.step <= 2e-4
        r.passed &= ok
        r.details.append(
            f"({m},{p}) {sym}: FD {est.value:+.6e} at h={est.step:.2e}, analytic {ref:+.6e}, rel {rel:.1e}"
            + ("" if ok else "  FAIL")
        )
    return r


def criterion_12(params: ModelParams, grid=DEFAULT_DELTA_GRID) -> CriterionResult:
    r = CriterionResult(12, "classification consistency for delta in (0, 1e-2]", True)
    for m, p, sym in FAMILIES:
        want = predict_stability(m, p, sym, params).kind
        fam = continue_family(m, p, sym, grid, params)
        bad, last_ok = [], 0.0
        for o in fam.members[1:]:
            got = classify(o.trace).kind
            if got != want:
                bad.append(f"delta={o.delta:g}: {got} (tau={o.trace:.6g})")
            elif not bad:
                last_ok = o.delta
        if not fam.complete:
            bad.append(f"family lost at delta={fam.aborted_at:g}: {fam.reason}")
        r.passed &= not bad
        r.details.append(
            f"({m},{p}) {sym}: predicted {want}; consistent for delta <= {last_ok:g}"
            + ("" if not bad else "; " + "; ".join(bad) + "  FAIL")
        )
    return r


CRITERIA: dict[int, Callable[[ModelParams], CriterionResult]] = {
    1: criterion_1,
    2: criterion_2,
    3: criterion_3,
    4: criterion_4,
    5: criterion_5,
    6: criterion_6,
    7: criterion_7,
    8: criterion_8,
    9: criterion_9,
    10: criterion_10,
    11: criterion_11,
    12: criterion_12,
}


def run_criterion(k: int, params: ModelParams | None = None) -> CriterionResult:
    params = params or ModelParams()
    t0 = time.perf_counter()
    try:
        res = CRITERIA[k](params)
    except CombDriveError as exc:
        res = CriterionResult(k, f"criterion {k}", False, [f"error: {type(exc).__name__}: {exc}"])
    res.runtime = time.perf_counter() - t0
    if res.time_limit is not None and res.runtime > res.time_limit:
        res.passed = False
        res.details.append(f"runtime {res.runtime:.1f} s exceeds {res.time_limit:g} s")
    return res


def run_all(params: ModelParams | None = None) -> list[CriterionResult]:
    return [run_criterion(k, params) for k in CRITERIA]

