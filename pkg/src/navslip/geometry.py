"""Curved 2D domains: exact boundary charts, structured meshes, boundary frames.

Orientation convention used everywhere: the unit tangent is the outward
normal rotated by +90 degrees, ``tau = (-n_y, n_x)``, so the domain lies to
the left when walking along increasing arclength.  Curvature is defined by
``dn/ds = kappa * tau``; the outer circle of radius R has kappa = 1/R and the
inner circle of an annulus has kappa = -1/R0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import (InfeasibleResolutionError, MeshingError,
                     NonTangentialInputError, NormalTraceError)
from .quadrature import line_rule

CHART_TOL = 1e-12


# --------------------------------------------------------------------------
# domain description and analytic charts


@dataclass(frozen=True)
class DomainSpec:
    """Shape of a computational domain.

    kind is one of ``disk`` (radius R), ``annulus`` (radii R0 < R1) or
    ``channel`` (length L, height H, slip walls at y = 0 and y = H, periodic
    in x).
    """

    kind: str
    R: float = 1.0
    R0: float = 0.5
    R1: float = 1.0
    L: float = 2.0
    H: float = 1.0

    def __post_init__(self):
        if self.kind not in ("disk", "annulus", "channel"):
            raise ValueError(f"unknown domain kind {self.kind!r}")
        for name in self.lengths():
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")
        if self.kind == "annulus" and not self.R0 < self.R1:
            raise ValueError("annulus needs R0 < R1")

    def lengths(self):
        return {"disk": ("R",), "annulus": ("R0", "R1"), "channel": ("L", "H")}[self.kind]

    @classmethod
    def disk(cls, R=1.0):
        return cls("disk", R=R)

    @classmethod
    def annulus(cls, R0=0.5, R1=1.0):
        return cls("annulus", R0=R0, R1=R1)

    @classmethod
    def channel(cls, L=2.0, H=1.0):
        return cls("channel", L=L, H=H)

    @property
    def diameter(self):
        if self.kind == "disk":
            return 2.0 * self.R
        if self.kind == "annulus":
            return 2.0 * self.R1
        return math.hypot(self.L, self.H)

    @property
    def feature_size(self):
        """Smallest geometric feature; the mesh size must stay below half of it."""
        if self.kind == "disk":
            return self.R
        if self.kind == "annulus":
            return self.R1 - self.R0
        return self.H

    @property
    def area(self):
        if self.kind == "disk":
            return math.pi * self.R ** 2
        if self.kind == "annulus":
            return math.pi * (self.R1 ** 2 - self.R0 ** 2)
        return self.L * self.H

    def contains(self, x, y, tol=1e-12):
        """Closure membership test for points (x, y)."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.kind == "disk":
            return np.hypot(x, y) <= self.R + tol
        if self.kind == "annulus":
            r = np.hypot(x, y)
            return (r >= self.R0 - tol) & (r <= self.R1 + tol)
        return (y >= -tol) & (y <= self.H + tol)

    def charts(self):
        if self.kind == "disk":
            return [CircleChart("outer", self.R)]
        if self.kind == "annulus":
            return [CircleChart("inner", self.R0, inner=True),
                    CircleChart("outer", self.R1)]
        return [WallChart("bottom", self.L, self.H, top=False),
                WallChart("top", self.L, self.H, top=True)]


class CircleChart:
    """Arclength chart of a circle centred at the origin."""

    def __init__(self, chart_id, radius, inner=False):
        self.chart_id = chart_id
        self.radius = float(radius)
        self.inner = inner
        self.period = 2.0 * math.pi * self.radius

    def __repr__(self):
        return f"CircleChart({self.chart_id!r}, {self.radius}, inner={self.inner})"

    def _theta(self, s):
        s = np.asarray(s, dtype=float)
        return (-s if self.inner else s) / self.radius

    def point(self, s):
        th = self._theta(s)
        return self.radius * np.stack([np.cos(th), np.sin(th)], axis=-1)

    def normal(self, s):
        th = self._theta(s)
        n = np.stack([np.cos(th), np.sin(th)], axis=-1)
        return -n if self.inner else n

    def tangent(self, s):
        n = self.normal(s)
        return np.stack([-n[..., 1], n[..., 0]], axis=-1)

    def curvature(self, s):
        k = (-1.0 if self.inner else 1.0) / self.radius
        return np.full(np.shape(s), k)

    def distance(self, pts):
        pts = np.asarray(pts, dtype=float)
        return np.abs(np.hypot(pts[..., 0], pts[..., 1]) - self.radius)

    def locate(self, pts):
        """Arclength parameter in [0, period) of the chart point nearest `pts`."""
        pts = np.asarray(pts, dtype=float)
        th = np.arctan2(pts[..., 1], pts[..., 0])
        s = (-th if self.inner else th) * self.radius
        return np.mod(s, self.period)


class WallChart:
    """Flat channel wall, periodic with period L in x."""

    def __init__(self, chart_id, L, H, top):
        self.chart_id = chart_id
        self.L = float(L)
        self.H = float(H)
        self.top = top
        self.period = self.L

    def __repr__(self):
        return f"WallChart({self.chart_id!r}, top={self.top})"

    def point(self, s):
        s = np.asarray(s, dtype=float)
        if self.top:
            x = np.mod(-s, self.L)
            return np.stack([x, np.full_like(x, self.H)], axis=-1)
        x = np.mod(s, self.L)
        return np.stack([x, np.zeros_like(x)], axis=-1)

    def normal(self, s):
        s = np.asarray(s, dtype=float)
        ny = 1.0 if self.top else -1.0
        return np.stack([np.zeros_like(s), np.full_like(s, ny)], axis=-1)

    def tangent(self, s):
        s = np.asarray(s, dtype=float)
        tx = -1.0 if self.top else 1.0
        return np.stack([np.full_like(s, tx), np.zeros_like(s)], axis=-1)

    def curvature(self, s):
        return np.zeros(np.shape(s))

    def distance(self, pts):
        pts = np.asarray(pts, dtype=float)
        return np.abs(pts[..., 1] - (self.H if self.top else 0.0))

    def locate(self, pts):
        pts = np.asarray(pts, dtype=float)
        s = -pts[..., 0] if self.top else pts[..., 0]
        return np.mod(s, self.L)


# --------------------------------------------------------------------------
# mesh


@dataclass
class Mesh:
    """Straight-edged triangulation with boundary edges tied to analytic charts.

    For the periodic channel the vertex array keeps the column x = L; the
    ``master`` map identifies it with x = 0 when degrees of freedom are built.
    Boundary edge ``k`` is edge ``bedge_local[k]`` of cell ``bedge_cell[k]``
    (local edge e joins local vertices e and e+1 mod 3), lies on chart
    ``bedge_chart[k]`` and spans arclength ``[bedge_s0[k], bedge_s1[k]]``.
    """

    domain: DomainSpec
    vertices: np.ndarray
    cells: np.ndarray
    master: np.ndarray
    charts: list
    bedge_cell: np.ndarray
    bedge_local: np.ndarray
    bedge_chart: np.ndarray
    bedge_s0: np.ndarray
    bedge_s1: np.ndarray
    h: float = field(default=0.0)

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_cells(self):
        return len(self.cells)

    @property
    def n_boundary_edges(self):
        return len(self.bedge_cell)

    @property
    def periodic(self):
        return self.domain.kind == "channel"

    def cell_areas(self):
        p = self.vertices[self.cells]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def bedge_vertices(self):
        """(K, 2) vertex indices of each boundary edge, in arclength order."""
        loc = self.bedge_local
        c = self.cells[self.bedge_cell]
        a = c[np.arange(len(loc)), loc]
        b = c[np.arange(len(loc)), (loc + 1) % 3]
        return np.column_stack([a, b])

    def boundary_loops(self):
        """Closed chains of boundary edges, one list of edge indices per loop."""
        ab = self.master[self.bedge_vertices()]
        start = {}
        for k, a in enumerate(ab[:, 0]):
            start.setdefault(int(a), []).append(k)
        seen = np.zeros(len(ab), dtype=bool)
        loops = []
        for k0 in range(len(ab)):
            if seen[k0]:
                continue
            loop = []
            k = k0
            while not seen[k]:
                seen[k] = True
                loop.append(k)
                nxt = start.get(int(ab[k, 1]), [])
                if len(nxt) != 1:
                    raise MeshingError("boundary edges do not form closed loops")
                k = nxt[0]
            if k != k0:
                raise MeshingError("boundary chain does not close on itself")
            loops.append(loop)
        return loops

    def export_text(self):
        """Plain-text dump: header, vertices, cells, boundary edges."""
        lines = [f"vertices {self.n_vertices} cells {self.n_cells} "
                 f"boundary_edges {self.n_boundary_edges}"]
        lines += [f"{x:.17g} {y:.17g}" for x, y in self.vertices]
        lines += [f"{a} {b} {c}" for a, b, c in self.cells]
        for k in range(self.n_boundary_edges):
            lines.append(
                f"{self.bedge_cell[k]} {self.bedge_local[k]} "
                f"{self.charts[self.bedge_chart[k]].chart_id} "
                f"{self.bedge_s0[k]:.17g} {self.bedge_s1[k]:.17g}")
        return "\n".join(lines) + "\n"

    def stats(self):
        areas = self.cell_areas()
        return {"vertices": self.n_vertices, "cells": self.n_cells,
                "boundary_edges": self.n_boundary_edges, "h": self.h,
                "min_area": float(areas.min()), "total_area": float(areas.sum()),
                "loops": len(self.boundary_loops())}


def _ring_stitch(inner, outer, ang_in, ang_out):
    """Triangulate the band between two closed rings of nodes sorted by angle."""
    tris = []
    ni, no = len(inner), len(outer)
    i = o = 0
    while i < ni or o < no:
        a_in = ang_in[i + 1] if i + 1 <= ni else np.inf
        a_out = ang_out[o + 1] if o + 1 <= no else np.inf
        if o < no and (i >= ni or a_out < a_in - 1e-12):
            tris.append((inner[i % ni], outer[o % no], outer[(o + 1) % no]))
            o += 1
        else:
            tris.append((inner[i % ni], outer[o % no], inner[(i + 1) % ni]))
            i += 1
    return tris


def _disk_grid(R, n):
    verts = [(0.0, 0.0)]
    rings = [[0]]
    for k in range(1, n + 1):
        m = 6 * k
        th = 2.0 * np.pi * np.arange(m) / m
        r = R * k / n
        idx = list(range(len(verts), len(verts) + m))
        verts += list(zip(r * np.cos(th), r * np.sin(th)))
        rings.append(idx)
    tris = []
    ring1 = rings[1]
    for j in range(6):
        tris.append((0, ring1[j], ring1[(j + 1) % 6]))
    for k in range(2, n + 1):
        mi, mo = 6 * (k - 1), 6 * k
        ang_in = 2.0 * np.pi * np.arange(mi + 1) / mi
        ang_out = 2.0 * np.pi * np.arange(mo + 1) / mo
        tris += _ring_stitch(rings[k - 1], rings[k], ang_in, ang_out)
    v = np.array(verts)
    # the outer ring sits exactly on the circle
    outer = np.array(rings[n])
    th = 2.0 * np.pi * np.arange(6 * n) / (6 * n)
    v[outer] = R * np.column_stack([np.cos(th), np.sin(th)])
    return v, np.array(tris, dtype=np.int64), np.arange(len(v))


def _annulus_grid(R0, R1, nr, nt):
    r = R0 + (R1 - R0) * np.arange(nr + 1) / nr
    r[0], r[-1] = R0, R1
    th = 2.0 * np.pi * np.arange(nt) / nt
    v = np.column_stack([np.outer(r, np.cos(th)).ravel(), np.outer(r, np.sin(th)).ravel()])
    idx = np.arange((nr + 1) * nt).reshape(nr + 1, nt)
    tris = []
    for i in range(nr):
        for j in range(nt):
            a, b = idx[i, j], idx[i, (j + 1) % nt]
            c, d = idx[i + 1, j], idx[i + 1, (j + 1) % nt]
            tris += [(a, b, d), (a, d, c)]
    return v, np.array(tris, dtype=np.int64), np.arange(len(v))


def _channel_grid(L, H, nx, ny):
    x = L * np.arange(nx + 1) / nx
    y = H * np.arange(ny + 1) / ny
    X, Y = np.meshgrid(x, y, indexing="ij")
    v = np.column_stack([X.ravel(), Y.ravel()])
    idx = np.arange((nx + 1) * (ny + 1)).reshape(nx + 1, ny + 1)
    tris = []
    for i in range(nx):
        for j in range(ny):
            a, b = idx[i, j], idx[i + 1, j]
            c, d = idx[i, j + 1], idx[i + 1, j + 1]
            tris += [(a, b, d), (a, d, c)]
    master = idx.copy()
    master[nx, :] = idx[0, :]
    return v, np.array(tris, dtype=np.int64), master.ravel()


def _max_edge(v, cells):
    p = v[cells]
    e = np.concatenate([p[:, 1] - p[:, 0], p[:, 2] - p[:, 1], p[:, 0] - p[:, 2]])
    return float(np.sqrt((e ** 2).sum(axis=1)).max())


def _grid_for(spec, n):
    if spec.kind == "disk":
        return _disk_grid(spec.R, n)
    if spec.kind == "annulus":
        nr = n
        nt = max(8, int(math.ceil(2.0 * math.pi * spec.R1 / (spec.R1 - spec.R0) * n)))
        return _annulus_grid(spec.R0, spec.R1, nr, nt)
    nx = max(3, int(math.ceil(spec.L / spec.H * n)))
    return _channel_grid(spec.L, spec.H, nx, n)


def _resolution(spec, h):
    """Smallest structured resolution whose longest edge does not exceed h."""
    if spec.kind == "disk":
        n = max(1, int(math.ceil(spec.R / h)))
    else:
        n = max(1, int(math.ceil(math.sqrt(2.0) * spec.feature_size / h)))
    while True:
        v, c, m = _grid_for(spec, n)
        if _max_edge(v, c) <= h * (1 + 1e-12):
            return n, (v, c, m)
        n += 1


def build_mesh(spec: DomainSpec, h: float) -> Mesh:
    """Structured, chart-conforming triangulation with longest edge <= h."""
    if not h > 0 or not h < 0.5 * spec.feature_size:
        raise InfeasibleResolutionError(
            f"h = {h} must lie in (0, {0.5 * spec.feature_size}) for {spec.kind}")
    _, (v, cells, master) = _resolution(spec, h)
    return _finish_mesh(spec, v, cells, master)


def build_mesh_level(spec: DomainSpec, n: int) -> Mesh:
    """Mesh at an explicit structured resolution n (rings / layers across)."""
    v, cells, master = _grid_for(spec, n)
    return _finish_mesh(spec, v, cells, master)


def _finish_mesh(spec, v, cells, master):
    p = v[cells]
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    area = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    flip = area < 0
    cells[flip] = cells[flip][:, [0, 2, 1]]
    area = np.abs(area)
    if np.any(area <= 1e-14 * _max_edge(v, cells) ** 2):
        raise MeshingError("degenerate cell produced")

    # boundary edges are those owned by one cell after periodic identification
    mc = master[cells]
    loc_a = mc[:, [0, 1, 2]].ravel()
    loc_b = mc[:, [1, 2, 0]].ravel()
    key = np.sort(np.column_stack([loc_a, loc_b]), axis=1)
    _, inv, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
    inv = inv.ravel()
    is_b = counts[inv] == 1
    bflat = np.nonzero(is_b)[0]
    bcell = bflat // 3
    bloc = bflat % 3
    charts = spec.charts()
    a = cells[bcell, bloc]
    b = cells[bcell, (bloc + 1) % 3]
    pa, pb = v[a], v[b]
    dist = np.array([[ch.distance(pa[k]) + ch.distance(pb[k]) for ch in charts]
                     for k in range(len(a))])
    bchart = np.argmin(dist, axis=1)
    s0 = np.empty(len(a))
    s1 = np.empty(len(a))
    for ci, ch in enumerate(charts):
        sel = bchart == ci
        if not np.any(sel):
            continue
        if np.max(np.maximum(ch.distance(pa[sel]), ch.distance(pb[sel]))) > CHART_TOL * max(1.0, spec.diameter):
            raise MeshingError(f"boundary vertex off chart {ch.chart_id}")
        sa = ch.locate(pa[sel])
        sb = ch.locate(pb[sel])
        ds = np.mod(sb - sa + 0.5 * ch.period, ch.period) - 0.5 * ch.period
        if np.any(ds <= 0):
            raise MeshingError(f"boundary edge orientation inconsistent on {ch.chart_id}")
        s0[sel] = sa
        s1[sel] = sa + ds
    order = np.lexsort((s0, bchart))
    mesh = Mesh(domain=spec, vertices=v, cells=cells, master=master, charts=charts,
                bedge_cell=bcell[order], bedge_local=bloc[order], bedge_chart=bchart[order],
                bedge_s0=s0[order], bedge_s1=s1[order], h=_max_edge(v, cells))
    loops = mesh.boundary_loops()
    if len(loops) != len(charts):
        raise MeshingError(f"expected {len(charts)} boundary loops, found {len(loops)}")
    return mesh


def refinement_levels(spec, h0, count=3):
    """Meshes at h0, h0/2, h0/4, ... built with doubled structured resolution."""
    n0, _ = _resolution(spec, h0)
    return [build_mesh_level(spec, n0 * 2 ** k) for k in range(count)]


# --------------------------------------------------------------------------
# boundary frame and boundary operators


@dataclass
class BoundaryFrame:
    """Boundary quadrature points with the analytic frame of the chart.

    ``t`` is the position in [0, 1] along the parent boundary edge, ``weight``
    the arclength weight.  Normal, tangent and curvature come from the chart,
    never from the polygon.
    """

    edge: np.ndarray
    t: np.ndarray
    s: np.ndarray
    chart: np.ndarray
    position: np.ndarray
    normal: np.ndarray
    tangent: np.ndarray
    curvature: np.ndarray
    weight: np.ndarray

    def __len__(self):
        return len(self.t)


def boundary_frame(mesh: Mesh, order: int = 6) -> BoundaryFrame:
    x, w = line_rule(order)
    nb = mesh.n_boundary_edges
    edge = np.repeat(np.arange(nb), len(x))
    t = np.tile(x, nb)
    ds = mesh.bedge_s1 - mesh.bedge_s0
    s = mesh.bedge_s0[edge] + t * ds[edge]
    weight = np.tile(w, nb) * ds[edge]
    pos = np.empty((len(s), 2))
    nrm = np.empty((len(s), 2))
    tan = np.empty((len(s), 2))
    kap = np.empty(len(s))
    chart = mesh.bedge_chart[edge]
    for ci, ch in enumerate(mesh.charts):
        sel = chart == ci
        pos[sel] = ch.point(s[sel])
        nrm[sel] = ch.normal(s[sel])
        tan[sel] = ch.tangent(s[sel])
        kap[sel] = ch.curvature(s[sel])
    return BoundaryFrame(edge=edge, t=t, s=s, chart=chart, position=pos, normal=nrm,
                         tangent=tan, curvature=kap, weight=weight)


def shape_operator_apply(frame: BoundaryFrame, trace, tol=1e-12):
    """Lambda v = kappa (v . tau) tau for a tangential boundary trace (nq, 2)."""
    trace = np.asarray(trace)
    vn = np.einsum("qi,qi->q", trace, frame.normal)
    if np.any(np.abs(vn) > tol):
        raise NonTangentialInputError(
            f"trace has normal component up to {np.abs(vn).max():.3e}")
    vt = np.einsum("qi,qi->q", trace, frame.tangent)
    return (frame.curvature * vt)[:, None] * frame.tangent


def check_navier_curl_identity(mesh: Mesh, frame: BoundaryFrame, v, tol=1e-10):
    """Boundary L2 norm of 2[(Dv)n]_tau - (curl v) tau + 2 Lambda v.

    `v` is a closed-form field exposing ``value(x, y)`` and ``jacobian(x, y)``
    (``J[..., i, j] = d v_i / d x_j``).
    """
    x, y = frame.position[:, 0], frame.position[:, 1]
    val = v.value(x, y)
    J = v.jacobian(x, y)
    n, tau = frame.normal, frame.tangent
    vn = np.einsum("qi,qi->q", val, n)
    scale = max(1.0, float(np.abs(val).max(initial=0.0)))
    if np.any(np.abs(vn) > tol * scale):
        raise NormalTraceError(f"v.n reaches {np.abs(vn).max():.3e} on the boundary")
    D = 0.5 * (J + np.swapaxes(J, -1, -2))
    stress = 2.0 * np.einsum("qij,qj->qi", D, n)
    stress_t = np.einsum("qi,qi->q", stress, tau)
    curl = J[:, 1, 0] - J[:, 0, 1]
    vt = np.einsum("qi,qi->q", val, tau)
    r = stress_t - curl + 2.0 * frame.curvature * vt
    return float(np.sqrt(np.sum(frame.weight * r ** 2)))


# --------------------------------------------------------------------------
# ball probes

BALL_FRACTION = 1.0 / 8.0


@dataclass(frozen=True)
class BallProbe:
    center: tuple
    radius: float
    factor: int = 2

    def validate(self, spec: DomainSpec):
        if self.factor not in (2, 3):
            raise ValueError("doubling factor must be 2 or 3")
        if not 0 < self.radius < BALL_FRACTION * spec.diameter:
            raise ValueError(
                f"probe radius {self.radius} outside (0, {BALL_FRACTION * spec.diameter})")
        if not bool(spec.contains(*self.center)):
            raise ValueError(f"probe centre {self.center} outside the closed domain")
        return self


def probe_grid(spec: DomainSpec, centers: Sequence, radii: Sequence, factor=2):
    return [BallProbe(tuple(c), float(r), factor).validate(spec) for c in centers for r in radii]
