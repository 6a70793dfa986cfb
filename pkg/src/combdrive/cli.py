"""Command-line front end: ``combdrive {period,orbit,stability,continue,verify}``.

Configuration comes from defaults, then a JSON config file (``--config`` or
$COMBDRIVE_CONFIG), then command-line flags.  Exit codes: 0 success,
1 verification failure, 2 invalid input.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .continuation import DEFAULT_DELTA_GRID, continue_family, family_records, trace_slope
from .errors import CombDriveError
from .firstorder import (
    a_coefficient,
    first_order_verdict,
    frequency_condition,
    predict_stability,
    tau_prime_even,
    tau_prime_odd,
)
from .hill import classify
from .model import DriveSpec, ModelParams
from .orbits import EVEN, ODD, check_admissible, count_zeros, even_orbit, odd_orbit, sample_orbit, symmetry_residuals
from .period import energy_grid, period, period_derivative, period_derivative_fd, verify_period_theorem
from .verification import CRITERIA, run_criterion

__all__ = ["RunConfig", "ConfigError", "load_config", "dump_config", "build_parser", "main"]

CONFIG_ENV = "COMBDRIVE_CONFIG"
EXIT_OK, EXIT_FAIL, EXIT_INVALID = 0, 1, 2
SYMMETRIES = (ODD, EVEN, "both")
FORMATS = ("csv", "jsonl")
SLOPE_TOL = 0.01


class ConfigError(ValueError):
    """Invalid configuration or command-line input."""


@dataclass(frozen=True)
class RunConfig:
    beta: float = 0.25
    V0: float = 0.5
    Tv: float = 2.0 * math.pi
    profile: str = "cosine"
    delta_grid: tuple[float, ...] = DEFAULT_DELTA_GRID
    m: tuple[int, ...] = (2,)
    p: tuple[int, ...] = (1,)
    n: tuple[int, ...] = (1, 2, 3, 4)
    symmetry: str = "both"
    grid_size: int = 100
    hbar: tuple[float, ...] = ()
    points: int = 1001
    criteria: tuple[int, ...] = tuple(CRITERIA)
    out: str | None = None
    format: str = "csv"
    workers: int = 1

    @property
    def params(self) -> ModelParams:
        return ModelParams(self.beta, self.V0, self.Tv)

    @property
    def symmetries(self) -> tuple[str, ...]:
        return (ODD, EVEN) if self.symmetry == "both" else (self.symmetry,)


_TUPLE_FIELDS = {"delta_grid": float, "m": int, "p": int, "n": int, "hbar": float, "criteria": int}
_SCALAR_FIELDS = {
    "beta": float,
    "V0": float,
    "Tv": float,
    "profile": str,
    "symmetry": str,
    "grid_size": int,
    "points": int,
    "out": str,
    "format": str,
    "workers": int,
}


def _coerce(name: str, value):
    if name in _TUPLE_FIELDS:
        kind = _TUPLE_FIELDS[name]
        items = parse_list(value, kind) if isinstance(value, str) else [value] if np.isscalar(value) else value
        out = []
        for v in items:
            if kind is int and (isinstance(v, bool) or float(v) != int(v)):
                raise ConfigError(f"{name}: {v!r} is not an integer")
            out.append(kind(v))
        return tuple(out)
    kind = _SCALAR_FIELDS[name]
    if value is None and name == "out":
        return None
    if kind is int and (isinstance(value, bool) or float(value) != int(value)):
        raise ConfigError(f"{name}: {value!r} is not an integer")
    return kind(value)


def parse_list(text: str, kind: Callable = float) -> list:
    """'1,2,5' or '1-4' (integers only) into a list."""
    items = []
    for part in str(text).split(","):
        part = part.strip()
        if not part:
            continue
        if kind is int and "-" in part[1:]:
            lo, hi = part.split("-", 1)
            items.extend(range(int(lo), int(hi) + 1))
        else:
            items.append(kind(part))
    return items


def make_config(values: dict, base: RunConfig | None = None) -> RunConfig:
    base = base or RunConfig()
    known = {f.name for f in fields(RunConfig)}
    unknown = set(values) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    try:
        cfg = replace(base, **{k: _coerce(k, v) for k, v in values.items()})
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    validate_config(cfg)
    return cfg


def validate_config(cfg: RunConfig) -> None:
    try:
        params = cfg.params
        grid = list(cfg.delta_grid)
        if not grid or grid[0] != 0.0 or any(b <= a for a, b in zip(grid, grid[1:])):
            raise ConfigError("delta grid must start at 0 and increase strictly")
        DriveSpec(grid[-1]).validate(params)
    except CombDriveError as exc:
        raise ConfigError(str(exc)) from exc
    if cfg.profile != "cosine":
        raise ConfigError(f"unknown drive profile {cfg.profile!r} (only 'cosine')")
    if cfg.symmetry not in SYMMETRIES:
        raise ConfigError(f"symmetry must be one of {', '.join(SYMMETRIES)}")
    if cfg.format not in FORMATS:
        raise ConfigError(f"format must be one of {', '.join(FORMATS)}")
    if cfg.workers < 1:
        raise ConfigError("workers must be >= 1")
    if cfg.grid_size < 10:
        raise ConfigError("grid_size must be >= 10")
    if cfg.points < 2:
        raise ConfigError("points must be >= 2")
    if any(not 0.0 < h < params.hbar_star for h in cfg.hbar):
        raise ConfigError(f"hbar values must lie in (0, {params.hbar_star:.12g})")
    if any(k not in CRITERIA for k in cfg.criteria):
        raise ConfigError(f"criteria must be within {min(CRITERIA)}..{max(CRITERIA)}")
    if any(v < 1 for v in cfg.m + cfg.p + cfg.n):
        raise ConfigError("m, p, n must be positive")


def dump_config(cfg: RunConfig) -> str:
    data = asdict(cfg)
    data = {k: list(v) if isinstance(v, tuple) else v for k, v in data.items()}
    return json.dumps(data, sort_keys=True, indent=2) + "\n"


def load_config(text: str, base: RunConfig | None = None) -> RunConfig:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    return make_config(data, base)


# ---------------------------------------------------------------- output


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(float(v))
    if v is None:
        return ""
    return str(v)


def render(rows: list[dict], fmt: str) -> str:
    buf = io.StringIO()
    if fmt == "jsonl":
        for row in rows:
            buf.write(json.dumps(row, sort_keys=True) + "\n")
        return buf.getvalue()
    if not rows:
        return ""
    flat = [_flatten(r) for r in rows]
    cols = list(flat[0])
    for r in flat[1:]:
        cols.extend(c for c in r if c not in cols)
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in flat:
        w.writerow([_fmt(r.get(c)) for c in cols])
    return buf.getvalue()


def _flatten(row: dict, prefix: str = "") -> dict:
    out = {}
    for k, v in row.items():
        if isinstance(v, dict):
            out.update(_flatten(v, f"{prefix}{k}_"))
        else:
            out[f"{prefix}{k}"] = v
    return out


def _emit(rows: list[dict], cfg: RunConfig, out: str | None = None) -> None:
    text = render(rows, cfg.format)
    path = out if out is not None else cfg.out
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def _say(cfg: RunConfig, msg: str = "") -> None:
    """Human-readable report: stdout when the table goes to a file, else stderr."""
    print(msg, file=sys.stdout if cfg.out else sys.stderr)


def _map(fn, items: list, workers: int) -> list:
    """Ordered map, in worker processes when ``workers > 1``; results gathered by the caller."""
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------- commands


def cmd_period(cfg: RunConfig) -> int:
    params = cfg.params
    report = verify_period_theorem(params, cfg.grid_size)
    grid = np.array(cfg.hbar) if cfg.hbar else energy_grid(params, cfg.grid_size)
    rows = [
        {
            "hbar": float(h),
            "T": period(h, params),
            "dTdh": period_derivative(h, params),
            "dTdh_fd": period_derivative_fd(h, params),
        }
        for h in grid
    ]
    _emit(rows, cfg)
    for c in report.checks:
        _say(cfg, f"{'PASS' if c.passed else 'FAIL'} {c.name}: {c.detail}")
    _say(cfg, report.summary())
    return EXIT_OK if report.passed else EXIT_FAIL


def _orbit_task(args) -> tuple[dict, list[dict]]:
    cfg, m, p, sym = args
    params = cfg.params
    orbit = (odd_orbit if sym == ODD else even_orbit)(m, p, params)
    traj = sample_orbit(orbit, cfg.points, periods=p)
    zeros = count_zeros(sample_orbit(orbit, 2, periods=p), (0.0, m * params.Tv))
    res = symmetry_residuals(orbit)
    summary = {
        "m": m,
        "p": p,
        "symmetry": sym,
        "hbar": orbit.hbar,
        "init": orbit.init,
        "period": res.measured_period * p,
        "zero_count": zeros,
        "residuals": {
            "symmetry": res.max_residual(),
            "energy_drift": res.energy_drift,
            "period": res.period_error,
        },
    }
    rows = [{"t": float(t), "x": float(x), "xdot": float(v), "H": float(h)} for t, x, v, h in traj.to_rows()]
    return summary, rows


def _suffixed(path: str, tag: str, many: bool) -> str:
    if not many:
        return path
    p = Path(path)
    return str(p.with_name(f"{p.stem}_{tag}{p.suffix}"))


def cmd_orbit(cfg: RunConfig) -> int:
    params = cfg.params
    for m in cfg.m:
        for p in cfg.p:
            _check(m, p, params)
    tasks = [(cfg, m, p, s) for m in cfg.m for p in cfg.p for s in cfg.symmetries]
    results = _map(_orbit_task, tasks, cfg.workers)
    ok = True
    for (_, m, p, sym), (summary, rows) in zip(tasks, results):
        if cfg.out:
            _emit(rows, cfg, _suffixed(cfg.out, f"m{m}_p{p}_{sym}", len(tasks) > 1))
        r = summary["residuals"]
        good = summary["zero_count"] == 2 * p and r["symmetry"] <= 1e-8 and r["period"] <= 1e-9
        ok &= good
        _say(cfg, 
            f"({m},{p}) {sym}: hbar={summary['hbar']:.12g} init={summary['init']:.12g}"
            f" period={summary['period']:.12f} zeros={summary['zero_count']}"
            f" residual={r['symmetry']:.2e} drift={r['energy_drift']:.2e} period_err={r['period']:.2e}"
            f" {'ok' if good else 'FAIL'}"
        )
    if not cfg.out:
        _emit([s for s, _ in results], replace(cfg, format="jsonl"))
    return EXIT_OK if ok else EXIT_FAIL


def _check(m: int, p: int, params: ModelParams) -> None:
    try:
        check_admissible(m, p, params)
    except CombDriveError as exc:
        raise ConfigError(str(exc)) from exc


def _stability_task(args) -> dict:
    cfg, m, p, sym = args
    params = cfg.params
    fn = tau_prime_odd if sym == ODD else tau_prime_even
    tp = fn(m, p, params)
    pred = predict_stability(m, p, sym, params)
    verdict = first_order_verdict(tp)
    n = tp.n
    if tp.delicate:
        ok = tp.relative_size <= 1e-8
    else:
        ok = tp.max_rel_disagreement <= 1e-8
    row = {
        "m": m,
        "p": p,
        "n": n,
        "symmetry": sym,
        "tau_prime": tp.value,
        "A_n": a_coefficient(n, params) if n is not None and p == 1 else None,
        "prediction": pred.kind,
        "first_order": verdict.kind,
        "frequency_condition": frequency_condition(n, params) if n is not None else None,
        "delicate": tp.delicate,
        "method_disagreement": tp.max_rel_disagreement,
        "crosscheck": ok,
    }
    for name, value in sorted(tp.estimates.items()):
        row[f"tau_prime_{name}"] = value
    return row


def cmd_stability(cfg: RunConfig) -> int:
    params = cfg.params
    pairs = []
    for p in cfg.p:
        for n in cfg.n:
            pairs.append((2 * n * p, p))
        for m in cfg.m:
            if m % (2 * p):
                pairs.append((m, p))
    pairs = sorted(set(pairs))
    for m, p in pairs:
        _check(m, p, params)
    tasks = [(cfg, m, p, s) for m, p in pairs for s in cfg.symmetries]
    rows = _map(_stability_task, tasks, cfg.workers)
    _emit(rows, cfg)
    for r in rows:
        flag = "delicate, tau'=0" if r["delicate"] else f"tau'={r['tau_prime']:+.6e}"
        _say(cfg, 
            f"({r['m']},{r['p']}) {r['symmetry']}: {flag}; prediction {r['prediction']};"
            f" first order {r['first_order']}; cross-check {'ok' if r['crosscheck'] else 'FAIL'}"
        )
    return EXIT_OK if all(r["crosscheck"] for r in rows) else EXIT_FAIL


def _family_task(args) -> dict:
    cfg, m, p, sym = args
    params = cfg.params
    fam = continue_family(m, p, sym, cfg.delta_grid, params)
    out = {"records": family_records(fam), "aborted_at": fam.aborted_at, "reason": fam.reason}
    if m % (2 * p) == 0:
        ref = (tau_prime_odd if sym == ODD else tau_prime_even)(m, p, params).value
        try:
            est = trace_slope(sym, m, p, params, start=min(1e-4, cfg.delta_grid[1]))
            out["slope"] = {"fd": est.value, "step": est.step, "analytic": ref, "rel": abs(est.value / ref - 1.0)}
        except CombDriveError as exc:
            out["slope"] = {"fd": None, "analytic": ref, "error": str(exc)}
    return out


def cmd_continue(cfg: RunConfig) -> int:
    params = cfg.params
    for m in cfg.m:
        for p in cfg.p:
            _check(m, p, params)
    tasks = [(cfg, m, p, s) for m in cfg.m for p in cfg.p for s in cfg.symmetries]
    results = _map(_family_task, tasks, cfg.workers)
    rows: list[dict] = []
    ok = True
    for (_, m, p, sym), res in zip(tasks, results):
        rows.extend(res["records"])
        fam = f"({m},{p}) {sym}"
        if res["aborted_at"] is not None:
            _say(cfg, f"{fam}: family lost at delta={res['aborted_at']:g}: {res['reason']}")
        for rec in res["records"]:
            _say(cfg, f"{fam}: delta={rec['delta']:.6g} tau={rec['trace']:.12g} {classify(rec['trace']).kind}")
        slope = res.get("slope")
        if slope is None:
            _say(cfg, f"{fam}: no analytic slope (m/(2p) not an integer)")
        elif slope.get("fd") is None:
            ok = False
            _say(cfg, f"{fam}: slope comparison failed: {slope['error']}")
        else:
            match = slope["rel"] <= SLOPE_TOL
            ok &= match
            _say(cfg, 
                f"{fam}: slope {'match' if match else 'MISMATCH'} within {slope['rel']:.1e}"
                f" (finite difference {slope['fd']:+.6e} at h={slope['step']:.2e}, analytic {slope['analytic']:+.6e})"
            )
    _emit(rows, cfg)
    return EXIT_OK if ok else EXIT_FAIL


def _criterion_task(args):
    cfg, k = args
    return run_criterion(k, cfg.params)


def cmd_verify(cfg: RunConfig) -> int:
    results = _map(_criterion_task, [(cfg, k) for k in cfg.criteria], cfg.workers)
    for r in results:
        _say(cfg, r.line())
        for d in r.details:
            _say(cfg, f"    {d}")
    records = [r.record() for r in results]
    if cfg.out:
        _emit(records, replace(cfg, format="jsonl"))
    n_ok = sum(r.passed for r in results)
    print(f"{n_ok}/{len(results)} criteria pass")
    return EXIT_OK if n_ok == len(results) else EXIT_FAIL


COMMANDS = {
    "period": cmd_period,
    "orbit": cmd_orbit,
    "stability": cmd_stability,
    "continue": cmd_continue,
    "verify": cmd_verify,
}


# ---------------------------------------------------------------- parsing


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help=f"JSON config file (default: ${CONFIG_ENV})")
    common.add_argument("--beta", type=float)
    common.add_argument("--v0", dest="V0", type=float)
    common.add_argument("--tv", dest="Tv", type=float)
    common.add_argument("--m", help="list or range, e.g. 2,4 or 1-5")
    common.add_argument("--p", help="list or range")
    common.add_argument("--n", help="list or range")
    common.add_argument("--symmetry", choices=SYMMETRIES)
    common.add_argument("--delta-grid", dest="delta_grid", help="comma-separated, starting at 0")
    common.add_argument("--hbar", help="comma-separated energies for the period table")
    common.add_argument("--grid-size", dest="grid_size", type=int)
    common.add_argument("--points", type=int, help="trajectory samples")
    common.add_argument("--criteria", help="subset of verification criteria, e.g. 1-4")
    common.add_argument("--out")
    common.add_argument("--format", choices=FORMATS)
    common.add_argument("--workers", type=int)
    common.add_argument("--dump-config", action="store_true", help="print the effective config and exit")

    parser = argparse.ArgumentParser(prog="combdrive", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "period": "period function table and its three properties",
        "orbit": "construct symmetric orbits and export trajectories",
        "stability": "first-order trace derivative and stability predictions",
        "continue": "continue orbits in delta and compare trace slopes",
        "verify": "run every acceptance check",
    }
    for name, text in helps.items():
        sub.add_parser(name, parents=[common], help=text)
    return parser


_FLAG_FIELDS = ("beta", "V0", "Tv", "m", "p", "n", "symmetry", "delta_grid", "hbar", "grid_size",
                "points", "criteria", "out", "format", "workers")


def config_from_args(ns: argparse.Namespace, environ=os.environ) -> RunConfig:
    cfg = RunConfig()
    path = ns.config or environ.get(CONFIG_ENV)
    if path:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        cfg = load_config(text, cfg)
    flags = {k: getattr(ns, k) for k in _FLAG_FIELDS if getattr(ns, k, None) is not None}
    return make_config(flags, cfg)


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INVALID if exc.code else EXIT_OK
    try:
        cfg = config_from_args(ns)
        if ns.dump_config:
            sys.stdout.write(dump_config(cfg))
            return EXIT_OK
        return COMMANDS[ns.command](cfg)
    except ConfigError as exc:
        print(f"combdrive: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
