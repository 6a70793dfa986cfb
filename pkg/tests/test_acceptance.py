"""Acceptance criteria 1-13 at their stated tolerances.

Each test prints one PASS/FAIL line; the lines are repeated together in the
terminal summary.  Failures here are genuine measured results, see
``details`` in the assertion message.
"""

import subprocess
import sys
import time

import pytest

from combdrive.model import ModelParams
from combdrive.verification import CRITERIA, run_criterion

SUMMARY: list[str] = []


def _report(line: str) -> None:
    SUMMARY.append(line)
    print(line)


@pytest.mark.parametrize("k", sorted(CRITERIA))
def test_criterion(k):
    res = run_criterion(k, ModelParams())
    _report(res.line())
    assert res.passed, "\n".join([res.line(), *res.details])


def test_criterion_13_verify_subcommand():
    t0 = time.perf_counter()
    proc = subprocess.run(
        [sys.executable, "-m", "combdrive.cli", "verify"], capture_output=True, text=True, timeout=600
    )
    elapsed = time.perf_counter() - t0
    ok = proc.returncode == 0 and elapsed < 300
    _report(
        f"criterion 13 {'PASS' if ok else 'FAIL'}  verify subcommand exits 0 in < 5 min"
        f"  (exit {proc.returncode}, {elapsed:.1f} s)"
    )
    assert ok, proc.stdout[-4000:]
