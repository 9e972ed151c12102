import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from navslip import fields
from navslip.errors import InfeasibleResolutionError, NonTangentialInputError, NormalTraceError
from navslip.geometry import (BallProbe, DomainSpec, boundary_frame, build_mesh, build_mesh_level,
                              check_navier_curl_identity, probe_grid, shape_operator_apply)

from conftest import SPECS


def test_disk_boundary_vertices_on_circle():
    mesh = build_mesh(DomainSpec.disk(1.0), 0.2)
    ab = mesh.bedge_vertices().ravel()
    r = np.hypot(*mesh.vertices[ab].T)
    assert np.abs(r - 1.0).max() <= 1e-12
    assert mesh.h <= 0.2


def test_annulus_has_two_loops():
    mesh = build_mesh(DomainSpec.annulus(0.5, 1.0), 0.1)
    assert len(mesh.boundary_loops()) == 2


def test_channel_boundary_only_on_walls():
    mesh = build_mesh(DomainSpec.channel(2.0, 1.0), 0.1)
    y = mesh.vertices[mesh.bedge_vertices().ravel(), 1]
    assert np.all((np.abs(y) < 1e-12) | (np.abs(y - 1.0) < 1e-12))
    assert len(mesh.boundary_loops()) == 2


def test_infeasible_resolution():
    with pytest.raises(InfeasibleResolutionError):
        build_mesh(DomainSpec.annulus(0.5, 1.0), 0.3)
    with pytest.raises(ValueError):
        DomainSpec.annulus(1.0, 0.5)


def test_cells_counterclockwise(kind):
    mesh = build_mesh_level(SPECS[kind], 4)
    assert mesh.cell_areas().min() > 0
    assert mesh.cell_areas().sum() == pytest.approx(SPECS[kind].area, rel=2e-2)


def test_refinement_halves_h(kind):
    hs = [build_mesh_level(SPECS[kind], n).h for n in (4, 8, 16)]
    for a, b in zip(hs, hs[1:]):
        assert 0.45 <= b / a <= 0.55


def test_frame_unit_and_orthogonal(kind):
    fr = boundary_frame(build_mesh_level(SPECS[kind], 3))
    assert np.abs(np.linalg.norm(fr.normal, axis=1) - 1).max() <= 1e-14
    assert np.abs(np.linalg.norm(fr.tangent, axis=1) - 1).max() <= 1e-14
    assert np.abs(np.einsum("qi,qi->q", fr.normal, fr.tangent)).max() <= 1e-14


def test_curvature_values():
    fr = boundary_frame(build_mesh_level(DomainSpec.disk(2.0), 3))
    assert np.allclose(fr.curvature, 0.5, atol=1e-15)
    fr = boundary_frame(build_mesh_level(DomainSpec.channel(), 3))
    assert np.all(fr.curvature == 0.0)
    mesh = build_mesh_level(DomainSpec.annulus(0.5, 1.0), 3)
    fr = boundary_frame(mesh)
    inner = np.array([mesh.charts[c].chart_id == "inner" for c in fr.chart])
    assert np.allclose(fr.curvature[inner], -2.0) and np.allclose(fr.curvature[~inner], 1.0)


@pytest.mark.parametrize("kind", ["disk", "annulus", "channel"])
def test_normal_derivative_matches_curvature(kind):
    for ch in SPECS[kind].charts():
        s = np.linspace(0.1, ch.period - 0.1, 7)
        k3 = np.abs(ch.curvature(s)).max() ** 3
        for ds in (1e-3, 5e-4):
            dn = (ch.normal(s + ds) - ch.normal(s - ds)) / (2 * ds)
            err = np.abs(dn - ch.curvature(s)[:, None] * ch.tangent(s)).max()
            # central difference on a circle: leading error kappa^3 ds^2 / 6
            assert err <= k3 * ds ** 2 / 6 * 1.01 + 1e-10


def test_shape_operator():
    fr = boundary_frame(build_mesh_level(DomainSpec.disk(1.0), 3))
    assert np.allclose(shape_operator_apply(fr, fr.tangent), fr.tangent, atol=1e-14)
    assert np.allclose(shape_operator_apply(fr, 3 * fr.tangent), 3 * fr.tangent, atol=1e-14)
    fw = boundary_frame(build_mesh_level(DomainSpec.channel(), 3))
    assert np.all(shape_operator_apply(fw, 2.5 * fw.tangent) == 0)
    with pytest.raises(NonTangentialInputError):
        shape_operator_apply(fr, fr.normal)


def test_curl_identity_examples():
    mesh = build_mesh_level(DomainSpec.disk(1.0), 3)
    fr = boundary_frame(mesh)
    assert check_navier_curl_identity(mesh, fr, fields.rigid_rotation()) < 1e-10
    assert check_navier_curl_identity(mesh, fr, fields.rotation_r2()) < 1e-8
    ch = build_mesh_level(DomainSpec.channel(), 3)
    assert check_navier_curl_identity(ch, boundary_frame(ch), fields.channel_shear(1.0)) < 1e-10


def test_curl_identity_whole_suite(kind):
    mesh = build_mesh_level(SPECS[kind], 3)
    fr = boundary_frame(mesh)
    for f in fields.smooth_suite(SPECS[kind]):
        assert check_navier_curl_identity(mesh, fr, f) < 1e-8, f.name


def test_curl_identity_rejects_normal_flow():
    mesh = build_mesh_level(DomainSpec.disk(1.0), 3)
    radial = fields.VectorField("radial", fields.X, fields.Y)
    with pytest.raises(NormalTraceError):
        check_navier_curl_identity(mesh, boundary_frame(mesh), radial)


def test_mesh_export_header_and_digits():
    mesh = build_mesh_level(DomainSpec.disk(), 2)
    lines = mesh.export_text().splitlines()
    assert lines[0] == f"vertices {mesh.n_vertices} cells {mesh.n_cells} boundary_edges {mesh.n_boundary_edges}"
    x, y = map(float, lines[2].split())
    assert (x, y) == tuple(mesh.vertices[1])


def test_ball_probe_validation():
    spec = DomainSpec.disk(1.0)
    BallProbe((0.0, 0.0), 0.2).validate(spec)
    with pytest.raises(ValueError):
        BallProbe((0.0, 0.0), 0.3).validate(spec)
    with pytest.raises(ValueError):
        BallProbe((2.0, 0.0), 0.1).validate(spec)
    with pytest.raises(ValueError):
        BallProbe((0.0, 0.0), 0.1, factor=4).validate(spec)
    assert len(probe_grid(spec, [(0, 0), (0.5, 0)], [0.1, 0.2])) == 4


@settings(max_examples=25, deadline=None)
@given(st.floats(0.0, 2 * math.pi), st.floats(-3.0, 3.0))
def test_shape_operator_linear_on_disk(theta, c):
    spec = DomainSpec.disk(1.0)
    ch = spec.charts()[0]
    s = np.array([theta])
    tau = ch.tangent(s)
    assert np.allclose(c * ch.curvature(s)[:, None] * tau, c * tau)
