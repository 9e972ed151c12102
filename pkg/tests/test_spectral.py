import math

import numpy as np
import pytest

from navslip.discretization import SlipCoefficient
from navslip.errors import SpanDeficiencyError
from navslip.spectral import (dense_eigenvalues, eig_alpha_table, eigensolve, fractional_apply,
                              halfpower_equivalence, imaginary_power_norm)

from conftest import ops_for


def test_eigenpair_postconditions(kind):
    ops = ops_for(kind, 3, 1.0)
    eig = eigensolve(ops, 8)
    assert eig.mu[0] > 0
    assert np.all(np.diff(eig.mu) >= 0)
    assert eig.residuals.max() <= 1e-8
    assert eig.gram_error() <= 1e-10


def test_dense_oracle_on_coarse_mesh(kind):
    ops = ops_for(kind, 2, 1.0)
    assert ops.n <= 600
    eig = eigensolve(ops, 6)
    dense = dense_eigenvalues(ops)[:6]
    assert np.allclose(eig.mu, dense, rtol=1e-8, atol=1e-10)


def test_zero_alpha_rotation_mode():
    for kind in ("disk", "annulus"):
        ops = ops_for(kind, 3, 0.0)
        eig = eigensolve(ops, 3)
        assert abs(eig.mu[0]) <= 1e-10
        r = ops.rigid_modes()[:, 0]
        assert abs(abs(r @ (ops.M @ eig.phi[:, 0])) - 1.0) <= 1e-8


def test_large_alpha_matches_dirichlet():
    ops = ops_for("disk", 4, 1.0)
    mu = eigensolve(ops.with_alpha(SlipCoefficient.constant(1e6)), 1).mu[0]
    mud = eigensolve(ops.dirichlet(), 1).mu[0]
    assert mu == pytest.approx(mud, rel=0.01)


def test_rayleigh_quotients_above_ground(rng):
    ops = ops_for("disk", 3, 1.0)
    eig = eigensolve(ops, 1)
    sys = ops.projector()
    for _ in range(100):
        u, _, _ = sys.solve(ops.M @ rng.standard_normal(ops.n))
        q = (u @ (ops.A @ u)) / (u @ (ops.M @ u))
        assert q >= eig.mu[0] - 1e-8


def test_eigenvalues_monotone_in_alpha():
    base = ops_for("disk", 3, 1.0)
    prev = None
    for a in (0.0, 0.3, 1.0, 5.0, 50.0):
        mu = eigensolve(base.with_alpha(SlipCoefficient.constant(a)), 5).mu
        if prev is not None:
            assert np.all(prev <= mu + 1e-10)
        prev = mu


def test_fractional_powers(rng):
    ops = ops_for("disk", 3, 1.0)
    eig = eigensolve(ops, 10)
    u = eig.phi @ rng.standard_normal(10)
    assert np.allclose(fractional_apply(eig, 0.0, u), u, atol=1e-12)
    assert np.allclose(fractional_apply(eig, 1.0, eig.phi[:, 0]), eig.mu[0] * eig.phi[:, 0], atol=1e-12)
    twice = fractional_apply(eig, 0.5, fractional_apply(eig, 0.5, u))
    once = fractional_apply(eig, 1.0, u)
    assert ops.l2(twice - once) <= 1e-10 * ops.l2(once)
    with pytest.raises(SpanDeficiencyError):
        fractional_apply(eig, 0.5, rng.standard_normal(ops.n))
    with pytest.raises(ValueError):
        fractional_apply(eig, 1.5, u)


def test_halfpower_equivalence_and_refinement():
    res = []
    for n in (4, 8):
        eig = eigensolve(ops_for("disk", n, 1.0), 10)
        r = halfpower_equivalence(eig)
        assert r.parseval_error <= 1e-10
        assert r.c1 > 0
        res.append(r)
    ratio = [r.c2 / r.c1 for r in res]
    assert abs(ratio[1] / ratio[0] - 1) <= 0.25


def test_halfpower_c2_at_most_linear_in_alpha():
    base = ops_for("disk", 3, 1.0)
    c2 = {a: halfpower_equivalence(eigensolve(base.with_alpha(SlipCoefficient.constant(a)), 8)).c2
          for a in (1.0, 10.0, 100.0)}
    assert c2[100.0] <= 100.0 * c2[1.0]


@pytest.mark.parametrize("s", [0.0, 1.0, -5.0, 5.0])
def test_imaginary_powers_unitary(s):
    eig = eigensolve(ops_for("disk", 3, 1.0), 10)
    assert imaginary_power_norm(eig, s) == pytest.approx(1.0, abs=1e-10)


def test_imaginary_powers_reject_zero_mode():
    eig = eigensolve(ops_for("disk", 3, 0.0), 4)
    with pytest.raises(SpanDeficiencyError):
        imaginary_power_norm(eig, 1.0)


def test_alpha_table():
    base = ops_for("disk", 3, 1.0)
    tab = eig_alpha_table(base, [0.0, 1.0, 10.0, 100.0, 1e3, 1e4], k=3)
    assert tab.monotone()
    assert np.all(tab.mu[-1] <= tab.mu_dirichlet + 1e-10)
    rows = tab.rows()
    assert len(rows) == 18 and {"alpha", "index", "mu", "mu_dirichlet", "gap"} == set(rows[0])
    assert all(s < 0 for s in tab.gap_slopes())
    with pytest.raises(ValueError):
        eig_alpha_table(base, [1.0, 10.0], k=2)
