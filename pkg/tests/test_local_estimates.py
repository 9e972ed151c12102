import math

import numpy as np
import pytest

from navslip.errors import SupportViolationError
from navslip.geometry import BallProbe
from navslip.local_estimates import (ball_quadrature, bump_forcing, caccioppoli_check, local_study,
                                     reverse_holder_check)
from navslip.stokes import solve_resolvent

from conftest import SPECS, ops_for


def test_ball_area_accuracy():
    ops = ops_for("disk", 4, 1.0)
    for c, r in (((0.2, 0.1), 0.2), ((0.0, 0.0), 0.1)):
        bq = ball_quadrature(ops.space, c, r)
        assert bq.measure == pytest.approx(math.pi * r * r, rel=1e-4)


def test_zero_field_degenerate():
    ops = ops_for("disk", 3, 1.0)
    rec = caccioppoli_check(ops, np.zeros(ops.n), BallProbe((0.2, 0.0), 0.2))
    assert rec.lhs == 0 and rec.degenerate


def test_rigid_rotation_has_zero_lhs():
    ops = ops_for("disk", 4, 1.0)
    u = ops.interpolate(lambda x, y: np.stack([-y, x], axis=-1))
    rec = caccioppoli_check(ops, u, BallProbe((0.1, 0.1), 0.2))
    assert rec.lhs <= 1e-20 and rec.rhs > 0


def test_constant_field_rhi_ratio_one():
    ops = ops_for("channel", 4, 1.0)
    u = ops.interpolate(lambda x, y: np.stack([np.ones_like(x), np.zeros_like(y)], axis=-1))
    rec = reverse_holder_check(ops, u, BallProbe((1.0, 0.5), 0.2), p=4)
    assert rec.ratio == pytest.approx(1.0, abs=1e-12)


def test_scaling_invariance(rng):
    ops = ops_for("disk", 3, 1.0)
    u = rng.standard_normal(ops.n)
    probe = BallProbe((1.0, 0.0), 0.2)
    for fn in (caccioppoli_check, reverse_holder_check):
        a, b = fn(ops, u, probe), fn(ops, 10 * u, probe)
        # the energy ratio is quadratic in u on both sides; the mean ratio is linear
        assert b.ratio == pytest.approx(a.ratio, rel=1e-12)


def test_support_violation():
    ops = ops_for("disk", 3, 1.0)
    f = bump_forcing((0.2, 0.0), 0.2)
    u, _, _ = solve_resolvent(ops, 1.0, f)
    with pytest.raises(SupportViolationError):
        caccioppoli_check(ops, u, BallProbe((0.3, 0.0), 0.2), forcing=f)
    with pytest.raises(ValueError):
        reverse_holder_check(ops, u, BallProbe((0.0, 0.0), 0.1), p=1)


def test_radius_monotonicity_of_means():
    ops = ops_for("disk", 4, 1.0)
    full = ops.full(ops.interpolate(lambda x, y: np.stack([-y * (1 + x), x * (1 + x)], axis=-1)))
    from navslip.local_estimates import local_mean
    c, r = (0.1, 0.0), 0.15
    small, big = local_mean(ops, full, c, r, 2, 8), local_mean(ops, full, c, 2 * r, 2, 8)
    assert big >= math.sqrt(0.25) * small - 1e-14


def test_study_stable_under_refinement():
    studies = [local_study(ops_for("disk", n, 1.0)) for n in (4, 8)]
    for kind in ("caccioppoli", "reverse_holder"):
        a, b = studies[0].max_ratio(kind), studies[1].max_ratio(kind)
        assert np.isfinite(a) and np.isfinite(b)
        assert max(a, b) / min(a, b) <= 2.0
        interior = studies[1].max_ratio(kind, "interior")
        boundary = studies[1].max_ratio(kind, "boundary")
        assert interior <= 2 * boundary or boundary <= 2 * interior
    rows = studies[1].rows()
    assert len(rows) == 2 * 27 + 2 * 27 * 3
