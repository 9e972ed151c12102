import math

import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, settings, strategies as st

from navslip import fields
from navslip.discretization import (FunctionSpace, SlipCoefficient, assemble, discrete_gradient,
                                    enforce_normal_constraint, greens_formula_check, helmholtz_project)
from navslip.errors import InconsistentChartError, NegativeSlipError
from navslip.geometry import DomainSpec, boundary_frame, build_mesh_level
from navslip.spectral import eigensolve

from conftest import SPECS, ops_for


def _rot(x, y):
    return np.stack([-y, x], axis=-1)


def test_zero_alpha_gives_zero_boundary_form(kind):
    ops = ops_for(kind, 3, 0.0)
    assert ops.B.nnz == 0 or np.abs(ops.B.data).max() == 0


def test_boundary_form_linear_in_alpha(kind):
    a = ops_for(kind, 3, 1.5)
    b = a.with_alpha(SlipCoefficient.constant(3.0))
    assert np.abs((b.B - 2 * a.B).data).max(initial=0.0) <= 1e-13 * np.abs(a.B.data).max()


def test_rigid_rotation_energy_on_disk():
    ops = ops_for("disk", 8, 1.0)
    r = ops.interpolate(_rot)
    assert abs(r @ (ops.K @ r)) < 1e-10
    assert r @ (ops.A @ r) == pytest.approx(2 * math.pi, rel=1e-6)


def test_symmetry_exact(kind):
    ops = ops_for(kind, 3, 2.0)
    assert abs(ops.K - ops.K.T).max() == 0
    assert abs(ops.B - ops.B.T).max() == 0


def test_negative_alpha_rejected():
    with pytest.raises(NegativeSlipError):
        SlipCoefficient.constant(-1.0)
    with pytest.raises(NegativeSlipError):
        SlipCoefficient("piecewise", 1.0, pieces=(("outer", 0.0, 1.0, -2.0),))


def test_frame_from_other_mesh_rejected():
    fine = build_mesh_level(DomainSpec.disk(), 6)
    coarse = build_mesh_level(DomainSpec.disk(), 2)
    with pytest.raises(InconsistentChartError):
        assemble(coarse, boundary_frame(fine), SlipCoefficient.constant(1.0))


def test_piecewise_alpha_pointwise():
    mesh = build_mesh_level(DomainSpec.disk(), 4)
    fr = boundary_frame(mesh)
    a = SlipCoefficient("piecewise", 0.0, pieces=(("outer", 0.0, math.pi, 5.0),))
    vals = a.evaluate(mesh, fr)
    assert set(np.unique(vals)) == {0.0, 5.0}
    assert a.positive_length(mesh, fr) == pytest.approx(math.pi, rel=1e-12)


def test_normal_constraint_geometry():
    mesh = build_mesh_level(DomainSpec.disk(), 4)
    cs = enforce_normal_constraint(FunctionSpace(mesh))
    sp = cs.space
    node = int(np.argmin(np.linalg.norm(sp.node_coords - [1.0, 0.0], axis=1)))
    assert np.allclose(sp.node_coords[node], [1.0, 0.0], atol=1e-14)
    col = cs.Q[[2 * node, 2 * node + 1]].toarray()
    nz = col[:, np.abs(col).sum(axis=0) > 0]
    assert nz.shape[1] == 1 and np.allclose(nz[:, 0], [0.0, 1.0], atol=1e-14)
    assert cs.n == 2 * sp.n_nodes - len(sp.boundary_nodes)

    ch = enforce_normal_constraint(FunctionSpace(build_mesh_level(DomainSpec.channel(), 4)))
    bn = ch.space.boundary_nodes
    rows = ch.Q[2 * bn + 1]
    assert abs(rows).max() == 0


def test_reconstruction_tangential(kind, rng):
    ops = ops_for(kind, 3, 1.0)
    full = ops.full(rng.standard_normal(ops.n)).reshape(-1, 2)
    sp = ops.space
    vn = np.einsum("qi,qi->q", full[sp.boundary_nodes], sp.boundary_normals)
    assert np.abs(vn).max() <= 1e-12


def test_helmholtz_examples(rng):
    ops = ops_for("disk", 4, 1.0)
    sp = ops.space
    # discrete gradient of the P1 interpolant of x^2 + y^2
    chi2 = np.sum(sp.node_coords[:sp.n_pressure] ** 2, axis=1)
    grad = discrete_gradient(ops, chi2)
    Pg, _ = helmholtz_project(ops, grad, full=False)
    assert ops.l2(Pg) <= 1e-8 * ops.l2(grad)

    r = ops.interpolate(_rot)
    Pr, _ = helmholtz_project(ops, r, full=False)
    assert ops.l2(Pr - r) <= 1e-8 * ops.l2(r)

    psi = rng.standard_normal(ops.n)
    P1, _ = helmholtz_project(ops, psi, full=False)
    P2, _ = helmholtz_project(ops, P1, full=False)
    assert ops.l2(P2 - P1) <= 1e-8 * ops.l2(psi)

    chi = rng.standard_normal(sp.n_pressure)
    g = discrete_gradient(ops, chi)
    assert abs(P1 @ (ops.M @ g)) <= 1e-8 * ops.l2(P1) * ops.l2(g)


def test_green_rigid_rotation(kind):
    if kind == "channel":
        v = fields.channel_translation()
    else:
        v = fields.rigid_rotation()
    assert greens_formula_check(ops_for(kind, 3, 1.0), v, fields.ZERO_PRESSURE) <= 1e-10


def test_nodal_gradient_projection_converges():
    # the nodal interpolant of grad(x^2 + y^2) is only a gradient up to O(h^2)
    out, hs = [], []
    for n in (4, 8):
        ops = ops_for("disk", n, 1.0)
        g = ops.space.interpolate(lambda x, y: np.stack([2 * x, 2 * y], axis=-1))
        out.append(ops.l2(helmholtz_project(ops, g)[0]))
        hs.append(ops.mesh.h)
    assert math.log(out[0] / out[1]) / math.log(hs[0] / hs[1]) >= 1.0


@pytest.mark.parametrize("kind,v,pi", [
    ("channel", fields.channel_shear(1.0), fields.ZERO_PRESSURE),
    ("disk", fields.rotation_r2(), fields.ScalarField("x", fields.X)),
])
def test_green_residual_converges(kind, v, pi):
    res = [greens_formula_check(ops_for(kind, n, 1.0), v, pi) for n in (4, 8)]
    if res[1] <= 1e-10:
        return
    assert math.log(res[0] / res[1]) / math.log(2) >= 1.0


def test_quadratic_form_matches_norms(kind, rng):
    ops = ops_for(kind, 3, 2.0)
    u = rng.standard_normal(ops.n)
    assert u @ (ops.A @ u) == pytest.approx(2 * ops.dnorm(u) ** 2 + ops.friction(u), rel=1e-12)


def test_korn_equivalence_stable():
    bounds = []
    for n in (2, 3, 4):
        ops = ops_for("disk", n, 1.0)
        w = sla.eigh((ops.K + ops.M).toarray(), ops.H1.toarray(), eigvals_only=True)
        bounds.append((w.min(), w.max()))
    lo = [b[0] for b in bounds]
    hi = [b[1] for b in bounds]
    assert min(lo) > 0
    assert max(lo) / min(lo) <= 1.2 and max(hi) / min(hi) <= 1.2


def test_coercivity_monotone_in_alpha():
    base = ops_for("disk", 3, 1.0)
    mus = [eigensolve(base.with_alpha(SlipCoefficient.constant(a)), 1).mu[0] for a in (0.5, 1.0, 10.0, 100.0)]
    assert mus[0] > 0
    assert all(b > a for a, b in zip(mus, mus[1:]))


@settings(max_examples=10, deadline=None)
@given(st.floats(0.0, 1e4), st.floats(0.0, 1e4))
def test_boundary_form_additive(a, b):
    base = ops_for("annulus", 2, 1.0)
    Ba = base.with_alpha(SlipCoefficient.constant(a)).B
    Bb = base.with_alpha(SlipCoefficient.constant(b)).B
    Bab = base.with_alpha(SlipCoefficient.constant(a + b)).B
    scale = max(a + b, 1.0) * np.abs(base.B.data).max()
    assert abs(Bab - Ba - Bb).max() <= 1e-12 * scale
