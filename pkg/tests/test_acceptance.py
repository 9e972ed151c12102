"""Acceptance suite: criteria 1-15 at their stated tolerances.

A single ``navslip full-acceptance`` run is made with ``--threads 4`` and a
second with ``--threads 1`` under the same run name; criteria 1-14 are read
from the threaded report, criterion 15 compares the two report.json files
byte for byte.  One PASS/FAIL line per criterion is printed and collected
for the terminal summary.
"""

import os
import subprocess
import sys

import pytest

from navslip import io

from conftest import ACCEPTANCE_LINES

TITLES = {
    1: "manufactured convergence orders",
    2: "resolvent decay of ||u||",
    3: "resolvent decay of ||Du||",
    4: "alpha-uniform resolvent constants",
    5: "linear energy identity",
    6: "Navier-Stokes energy equality",
    7: "decay constant vs mu_1",
    8: "smoothing bounds under dt halving",
    9: "square-root domain and H1 equivalence",
    10: "unitary imaginary powers",
    11: "alpha -> infinity gap rates",
    12: "eigenvalue limit as alpha grows",
    13: "curl identity and Green's formula",
    14: "local estimate ratio stability",
    15: "threads 4 vs 1 report.json identical",
}


def _run(root, threads):
    cmd = [sys.executable, "-m", "navslip.cli", "full-acceptance", "--out", str(root), "--name", "acceptance",
           "--threads", str(threads), "-q"]
    proc = subprocess.run(cmd, capture_output=True, text=True, timeout=3600)
    return proc, root / "acceptance"


@pytest.fixture(scope="module")
def runs(tmp_path_factory):
    base = tmp_path_factory.mktemp("acceptance")
    threaded = _run(base / "threads4", 4)
    serial = _run(base / "threads1", 1)
    return threaded, serial


def _criterion(report, n):
    for c in report["criteria"]:
        if c["number"] == n:
            return c
    raise KeyError(n)


def _detail(c):
    if c["error"]:
        return c["error"]
    failed = [ch for ch in c["checks"] if not ch["passed"]]
    shown = failed or c["checks"]
    return "; ".join(f"{ch['name']} = {ch['value']:.4g}" for ch in shown[:3]
                     if ch["value"] is not None)


def _record(n, ok, detail):
    line = f"criterion {n:2d} [{'PASS' if ok else 'FAIL'}] {TITLES[n]}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


@pytest.mark.parametrize("n", range(1, 15))
def test_criterion(runs, n):
    (proc, run_dir), _ = runs
    report_path = run_dir / "report.json"
    assert report_path.exists(), f"no report: exit {proc.returncode}\n{proc.stderr[-2000:]}"
    c = _criterion(io.read_json(report_path), n)
    ok = bool(c["passed"]) and not c["error"] and all(ch["passed"] for ch in c["checks"]) and c["checks"]
    _record(n, bool(ok), _detail(c))
    assert ok, _detail(c)


def test_criterion_15_determinism(runs):
    (p4, d4), (p1, d1) = runs
    a, b = d4 / "report.json", d1 / "report.json"
    assert a.exists() and b.exists(), (p4.stderr[-1000:], p1.stderr[-1000:])
    same = a.read_bytes() == b.read_bytes()
    tables = sorted(f for f in os.listdir(d4) if f.endswith(".csv") or f.endswith(".svg"))
    diff = [f for f in tables if (d4 / f).read_bytes() != (d1 / f).read_bytes()]
    _record(15, same and not diff, f"report.json {'identical' if same else 'differs'}; "
                                   f"{len(tables) - len(diff)}/{len(tables)} tables and plots identical")
    assert same
    assert not diff
    assert p4.returncode == p1.returncode == 0
