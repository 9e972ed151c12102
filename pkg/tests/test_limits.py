import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from navslip import fields
from navslip.discretization import SlipCoefficient
from navslip.errors import DegenerateFitError
from navslip.evolution import SchemeConfig
from navslip.limits import (GapNorms, alpha_sweep, fit_rate, mesh_floor_estimate, poiseuille_gaps,
                            slip_poiseuille, steady_alpha_limit, vanishing_initial)
from navslip.stokes import solve_steady

from conftest import ops_for

GRID = np.logspace(0, 4, 17)


def smooth_force(x, y):
    return np.stack([np.cos(y) + x * y, np.sin(x) - y], axis=-1)


def test_fit_exact_power_law():
    res = fit_rate(GRID, 3.0 / GRID)
    assert res.slope == pytest.approx(-1.0, abs=1e-6)
    assert res.constant == pytest.approx(3.0, rel=1e-12)
    assert res.window == (100.0, 1e4)


def test_fit_detects_floor():
    # the floor only shows once 3 / alpha approaches 1e-12
    grid = np.logspace(0, 13, 53)
    res = fit_rate(grid, 3.0 / grid + 1e-12, decades=4.0)
    assert res.excluded and min(res.excluded) > 1e11
    assert res.window[1] < 1e12
    assert res.slope == pytest.approx(-1.0, abs=0.02)


def test_fit_mesh_floor_and_degenerate():
    g = 3.0 / GRID
    res = fit_rate(GRID, g, decades=4.0, mesh_floor=3e-3)
    assert max(res.excluded) == pytest.approx(1e4) and min(res.excluded) >= 1e3
    with pytest.raises(DegenerateFitError):
        fit_rate(GRID, g, mesh_floor=1.0)


@settings(max_examples=30, deadline=None)
@given(st.floats(-3.0, -0.2), st.floats(1e-3, 1e3))
def test_fit_recovers_any_power(p, c):
    res = fit_rate(GRID, c * GRID ** p)
    assert res.slope == pytest.approx(p, abs=1e-9)
    assert res.residual <= 1e-9


def test_slip_poiseuille_profile():
    H, a = 1.0, 4.0
    u = slip_poiseuille(H, a)
    # u' = alpha u at y = 0 (normal -e_y); -u'' = 1
    assert 0.5 * H == pytest.approx(a * u(0.0))
    assert u(0.3) - u(0.0) == pytest.approx(0.5 * 0.3 * 0.7)


def test_zero_forcing_zero_gaps():
    ops = ops_for("disk", 3, 1.0)
    rep = alpha_sweep(ops, "steady", np.logspace(0, 4, 5), data=lambda x, y: 0.0 * smooth_force(x, y))
    assert max(rep.boundary_gap + rep.energy_gap + rep.h1_gap) == 0.0


def test_poiseuille_closed_form():
    ops = ops_for("channel", 4, 1.0)
    rep = steady_alpha_limit(ops, GRID)
    exact = [poiseuille_gaps(2.0, 1.0, a) for a in GRID]
    for got, ex in zip(rep.boundary_gap, exact):
        assert got == pytest.approx(ex[0], rel=1e-8)
    for got, ex in zip(rep.energy_gap, exact):
        assert got == pytest.approx(ex[1], rel=1e-8)
    # squared gaps of a constant shift H / (2 alpha): alpha^-2
    assert rep.fit("boundary_gap", mesh_floor=0.0).slope == pytest.approx(-2.0, abs=1e-6)


def test_disk_steady_boundary_rate_and_twin():
    ops = ops_for("disk", 16, 1.0)
    floor = mesh_floor_estimate(ops)
    rep = alpha_sweep(ops, "steady", GRID, data=smooth_force, mesh_floor=floor)
    assert rep.fit("boundary_gap").slope <= -0.95
    top = [g for a, g in zip(rep.alpha, rep.boundary_gap) if a >= 10.0]
    assert all(b <= 1.05 * a for a, b in zip(top, top[1:]))
    opa = ops.with_alpha(SlipCoefficient.constant(GRID[-1]))
    u = solve_steady(opa, smooth_force).u
    trace = math.sqrt(GapNorms(ops).boundary_sq(opa.full(u)))
    assert trace <= 1e-3 * opa.l2(u)


def test_vanishing_initial_data_rates():
    ops = ops_for("disk", 8, 1.0)
    u0, defect = vanishing_initial(ops, fields.smooth_suite(ops.mesh.domain)[0])
    assert defect < 0.5
    sp = ops.space
    full = ops.full(u0).reshape(-1, 2)
    assert np.abs(full[sp.boundary_nodes]).max() == 0
    floor = mesh_floor_estimate(ops)
    cfg = SchemeConfig(0.5, 0.01, 0.5)
    rep = alpha_sweep(ops, "stokes_evolution", GRID, data=u0, cfg=cfg, mesh_floor=floor)
    comb = fit_rate(rep.alpha, rep.combined(), mesh_floor=floor)
    assert comb.slope <= -0.95
    assert comb.residual < 0.1


def test_sweep_executor_matches_serial():
    ops = ops_for("disk", 3, 1.0)
    grid = np.logspace(0, 4, 5)
    serial = alpha_sweep(ops, "resolvent", grid, data=smooth_force, lam=5.0)
    with ThreadPoolExecutor(3) as ex:
        par = alpha_sweep(ops, "resolvent", grid, data=smooth_force, lam=5.0, executor=ex)
    assert serial.to_json() == par.to_json()


def test_sweep_rejects_short_grid():
    with pytest.raises(ValueError):
        alpha_sweep(ops_for("disk", 2, 1.0), "steady", [1.0, 10.0])
    with pytest.raises(ValueError):
        alpha_sweep(ops_for("disk", 2, 1.0), "bogus", GRID)
