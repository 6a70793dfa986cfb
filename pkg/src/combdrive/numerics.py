"""Numerical kernels: adaptive IVP integration, Gauss-Legendre quadrature, root bracketing.

The integrator is scipy's Dormand-Prince 8(5,3) pair (``DOP853``) wrapped so
that failures surface as exceptions and the result is an immutable record.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import solve_ivp

from .errors import ConvergenceError, IntegrationError, RangeError

RTOL = 1e-11
ATOL = 1e-12
QUAD_TOL = 1e-12
ROOT_TOL = 1e-13


@dataclass(frozen=True)
class IvpSolution:
    """Result of :func:`integrate_ivp`.

    ``times`` and ``states`` are the accepted step nodes; ``states[i]`` is the
    state vector at ``times[i]``.  Call the object to evaluate the dense
    interpolant at arbitrary times inside the span.
    """

    times: np.ndarray
    states: np.ndarray
    rel_tol: float
    abs_tol: float
    n_steps: int
    n_evals: int
    _dense: object

    def __call__(self, t):
        return self._dense(t)

    @property
    def t0(self) -> float:
        return float(self.times[0])

    @property
    def t1(self) -> float:
        return float(self.times[-1])

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


def integrate_ivp(
    field: Callable[[float, np.ndarray], np.ndarray],
    y0: Sequence[float],
    span: tuple[float, float],
    rel_tol: float = RTOL,
    abs_tol: float | Sequence[float] = ATOL,
    max_step: float = np.inf,
) -> IvpSolution:
    """Integrate ``y' = field(t, y)`` over ``span`` with dense output.

    ``span`` may run backwards (t1 < t0).  Raises :class:`IntegrationError`
    if the step size underflows, reporting where.
    """
    t0, t1 = map(float, span)
    if t0 == t1:
        raise RangeError("empty integration span")
    if rel_tol <= 0 or np.any(np.asarray(abs_tol) <= 0):
        raise RangeError("tolerances must be positive")
    sol = solve_ivp(
        field,
        (t0, t1),
        np.asarray(y0, dtype=float),
        method="DOP853",
        rtol=rel_tol,
        atol=abs_tol,
        dense_output=True,
        max_step=max_step,
    )
    if sol.status != 0:
        t_fail = float(sol.t[-1])
        raise IntegrationError(
            f"integration stopped at t={t_fail:.12g} (state {sol.y[:, -1]}): {sol.message}",
            t=t_fail,
        )
    return IvpSolution(
        times=sol.t.copy(),
        states=sol.y.T.copy(),
        rel_tol=rel_tol,
        abs_tol=float(np.max(abs_tol)),
        n_steps=len(sol.t) - 1,
        n_evals=int(sol.nfev),
        _dense=sol.sol,
    )


@lru_cache(maxsize=32)
def gauss_legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of the n-point rule on [-1, 1]."""
    x, w = np.polynomial.legendre.leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_rule(g: Callable[[np.ndarray], np.ndarray], a: float, b: float, n: int) -> float:
    x, w = gauss_legendre(n)
    half = 0.5 * (b - a)
    return float(half * np.dot(w, g(a + half * (x + 1.0))))


def composite_gauss(
    g: Callable[[np.ndarray], np.ndarray], edges: np.ndarray, n: int
) -> float:
    """Fixed n-point Gauss rule on every panel ``[edges[i], edges[i+1]]``."""
    x, w = gauss_legendre(n)
    edges = np.asarray(edges, dtype=float)
    lo, hi = edges[:-1], edges[1:]
    half = 0.5 * (hi - lo)
    nodes = lo[:, None] + half[:, None] * (x[None, :] + 1.0)
    vals = g(nodes.ravel()).reshape(nodes.shape)
    return float(np.sum(half * (vals @ w)))


def quad_regularized(
    g: Callable[[np.ndarray], np.ndarray],
    tol: float = QUAD_TOL,
    a: float = 0.0,
    b: float = 0.5 * math.pi,
    breakpoints: Sequence[float] | None = None,
    n_start: int = 16,
    max_doublings: int = 12,
) -> float:
    """Integrate a smooth, vectorised ``g`` over ``[a, b]`` (default ``[0, pi/2]``).

    Gauss-Legendre with node doubling until two successive estimates differ by
    at most ``tol * max(1, |estimate|)``.  With ``breakpoints`` the rule is
    applied panel-wise (all panels refined together), which is how endpoint
    layers are resolved.
    """
    edges = np.unique(np.concatenate(([a, b], breakpoints or [])))
    edges = edges[(edges >= min(a, b)) & (edges <= max(a, b))]
    if a > b:
        edges = edges[::-1]
    n = n_start
    prev = composite_gauss(g, edges, n)
    for _ in range(max_doublings):
        n *= 2
        cur = composite_gauss(g, edges, n)
        if abs(cur - prev) <= tol * max(1.0, abs(cur)):
            return cur
        prev = cur
    raise ConvergenceError(
        f"Gauss-Legendre did not converge after {max_doublings} doublings "
        f"({n} nodes/panel, last change {abs(cur - prev):.3e})"
    )


def find_root(
    f: Callable[[float], float],
    a: float,
    b: float,
    tol: float = ROOT_TOL,
    fprime: Callable[[float], float] | None = None,
    max_iter: int = 400,
) -> float:
    """Root of ``f`` in ``[a, b]`` by bisection, optionally polished by one Newton step.

    Requires ``f(a) * f(b) <= 0``.  The Newton step is kept only if it stays
    in the final bracket and does not increase ``|f|``.
    """
    fa, fb = f(a), f(b)
    if fa == 0.0:
        return a
    if fb == 0.0:
        return b
    if fa * fb > 0:
        raise RangeError(f"invalid bracket [{a}, {b}]: f(a)={fa:.3e}, f(b)={fb:.3e}")
    lo, hi, flo = a, b, fa
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if abs(hi - lo) <= tol or mid in (lo, hi):
            break
        fm = f(mid)
        if fm == 0.0:
            return mid
        if (fm < 0) == (flo < 0):
            lo, flo = mid, fm
        else:
            hi = mid
    root = 0.5 * (lo + hi)
    if fprime is not None:
        d = fprime(root)
        if d != 0.0 and math.isfinite(d):
            fr = f(root)
            cand = root - fr / d
            if min(lo, hi) <= cand <= max(lo, hi) and abs(f(cand)) <= abs(fr):
                root = cand
    return root
