"""Caccioppoli and weak reverse Hölder probes on balls intersected with the domain.

Integrals over Omega cap B use the cell quadrature on cells inside the
ball; cells cut by the circle are subdivided in reference coordinates and
the remaining cut pieces keep only the quadrature points inside the ball.
Means are taken against the measure |Omega cap B| of the same quadrature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .discretization import OperatorSet, p2_basis
from .errors import SupportViolationError
from .geometry import BallProbe
from .quadrature import triangle_rule

RECORD_COLUMNS = ("probe_x", "probe_y", "r", "lambda_abs", "p", "lhs", "rhs", "ratio", "h")

_CHILDREN = None


def _children():
    """The four reference sub-triangles of midpoint subdivision, as affine (origin, A)."""
    global _CHILDREN
    if _CHILDREN is None:
        v = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
        m = np.array([[0.5, 0.0], [0.5, 0.5], [0.0, 0.5]])
        tris = [(v[0], m[0], m[2]), (m[0], v[1], m[1]), (m[2], m[1], v[2]), (m[1], m[2], m[0])]
        _CHILDREN = [(a, np.column_stack([b - a, c - a])) for a, b, c in tris]
    return _CHILDREN


@dataclass
class BallQuadrature:
    cells: np.ndarray     # (m,) cell of each point
    ref: np.ndarray       # (m, 2) reference coordinates
    weights: np.ndarray   # (m,) physical weights
    points: np.ndarray    # (m, 2)

    @property
    def measure(self):
        return float(self.weights.sum())


def _map(space, cells, ref):
    N, dN = p2_basis(ref)
    X = space.geom[cells]                              # (m, 6, 2)
    pts = np.einsum("ma,mai->mi", N, X)
    J = np.einsum("mai,maj->mij", X, dN)
    det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
    return pts, det, J, N, dN


_CORNERS = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.5, 0.5], [0.5, 0.0], [0.0, 0.5]])


def ball_quadrature(space, center, radius, degree=8, levels=4):
    """Points/weights for integrals over Omega cap B(center, radius) (cached per space)."""
    cache = space.__dict__.setdefault("_ball_cache", {})
    key = (float(center[0]), float(center[1]), float(radius), degree, levels)
    if key not in cache:
        cache[key] = _ball_quadrature(space, np.asarray(center, float), float(radius), degree, levels)
    return cache[key]


def _sector_or_triangle(p, q, r):
    """Signed area of B(0, r) cap triangle (0, p, q)."""
    d = q - p
    A, B, C = d @ d, 2.0 * (p @ d), p @ p - r * r
    ts = [0.0]
    disc = B * B - 4.0 * A * C
    if A > 0 and disc > 0:
        sq = math.sqrt(disc)
        ts += sorted(t for t in ((-B - sq) / (2 * A), (-B + sq) / (2 * A)) if 0.0 < t < 1.0)
    ts.append(1.0)
    area = 0.0
    for t0, t1 in zip(ts[:-1], ts[1:]):
        a, b = p + t0 * d, p + t1 * d
        cross = a[0] * b[1] - a[1] * b[0]
        mid = p + 0.5 * (t0 + t1) * d
        if mid @ mid <= r * r:
            area += 0.5 * cross
        else:
            area += 0.5 * r * r * math.atan2(cross, a @ b)
    return area


def _cut_fraction(tri, r):
    """Fraction of the straight triangle `tri` (relative to the centre) inside B(0, r)."""
    a = 0.5 * ((tri[1, 0] - tri[0, 0]) * (tri[2, 1] - tri[0, 1]) - (tri[1, 1] - tri[0, 1]) * (tri[2, 0] - tri[0, 0]))
    if a == 0:
        return 0.0
    cut = sum(_sector_or_triangle(tri[i], tri[(i + 1) % 3], r) for i in range(3))
    return float(min(max(cut / a, 0.0), 1.0))


def _ball_quadrature(space, c, radius, degree, levels):
    ref, w = triangle_rule(degree)
    nq = len(w)
    geom = space.geom
    d = np.linalg.norm(geom - c, axis=-1)              # (nc, 6) distances of geometry nodes
    h = np.max(np.linalg.norm(geom[:, [1, 2, 0]] - geom[:, [0, 1, 2]], axis=-1), axis=1)
    cl = np.nonzero(d.min(axis=1) < radius + h)[0]
    o = np.zeros((len(cl), 2))
    A = np.tile(np.eye(2), (len(cl), 1, 1))
    cells, refs, ws = [], [], []
    kids = _children()
    ko = np.array([k[0] for k in kids])
    kA = np.array([k[1] for k in kids])
    for level in range(levels + 1):
        if len(cl) == 0:
            break
        corners = o[:, None, :] + np.einsum("kj,pij->pki", _CORNERS, A)
        pts, _, _, _, _ = _map(space, np.repeat(cl, 6), corners.reshape(-1, 2))
        pts = pts.reshape(-1, 6, 2)
        dist = np.linalg.norm(pts - c, axis=-1)
        size = np.max(np.linalg.norm(pts[:, [1, 2, 0]] - pts[:, [0, 1, 2]], axis=-1), axis=1)
        full = dist.max(axis=1) < radius - 0.25 * size
        out = dist.min(axis=1) > radius + size
        take = full | ~out if level == levels else full
        if np.any(take):
            sub_ref = (o[take, None, :] + np.einsum("qj,pij->pqi", ref, A[take])).reshape(-1, 2)
            sub_w = (w[None, :] * np.abs(np.linalg.det(A[take]))[:, None]).ravel()
            sub_c = np.repeat(cl[take], nq)
            if level == levels:
                p, _, _, _, _ = _map(space, sub_c, sub_ref)
                inside = np.linalg.norm(p - c, axis=1) <= radius
                frac = np.ones(int(take.sum()))
                for j, pi in enumerate(np.nonzero(take)[0]):
                    if not full[pi]:
                        frac[j] = _cut_fraction(pts[pi, :3] - c, radius)
                keep = np.repeat(full[take], nq) | inside
                # rescale the surviving weights of each cut piece to the exact cut area
                kw = np.where(keep, sub_w, 0.0).reshape(-1, nq)
                tot = sub_w.reshape(-1, nq).sum(axis=1)
                got = kw.sum(axis=1)
                empty = (got == 0) & (frac > 0)
                kw[empty] = sub_w.reshape(-1, nq)[empty]
                got[empty] = tot[empty]
                keep = keep | np.repeat(empty, nq)
                scale = np.where(got > 0, frac * tot / np.where(got > 0, got, 1.0), 0.0)
                sub_w = (kw * scale[:, None]).ravel()
                sub_ref, sub_w, sub_c = sub_ref[keep], sub_w[keep], sub_c[keep]
            cells.append(sub_c)
            refs.append(sub_ref)
            ws.append(sub_w)
        split = ~(full | out)
        if level == levels or not np.any(split):
            break
        m = int(split.sum())
        Ap = np.repeat(A[split], 4, axis=0)
        o = np.repeat(o[split], 4, axis=0) + np.einsum("pij,pj->pi", Ap, np.tile(ko, (m, 1)))
        A = np.einsum("pij,pjk->pik", Ap, np.tile(kA, (m, 1, 1)))
        cl = np.repeat(cl[split], 4)
    if not cells:
        return BallQuadrature(np.zeros(0, int), np.zeros((0, 2)), np.zeros(0), np.zeros((0, 2)))
    cells = np.concatenate(cells)
    refs = np.concatenate(refs)
    ws = np.concatenate(ws)
    pts, det, _, _, _ = _map(space, cells, refs)
    return BallQuadrature(cells=cells, ref=refs, weights=ws * det, points=pts)


def evaluate_on(space, bq: BallQuadrature, ufull):
    """Values (m, 2) and gradients (m, 2, 2) of a full nodal field at ball quadrature points."""
    if len(bq.cells) == 0:
        return np.zeros((0, 2)), np.zeros((0, 2, 2))
    _, det, J, N, dN = _map(space, bq.cells, bq.ref)
    inv = np.linalg.inv(J)
    G = np.einsum("mji,maj->mai", inv, dN)
    U = np.asarray(ufull).reshape(-1, 2)[space.cell_nodes[bq.cells]]
    val = np.einsum("ma,mai->mi", N, U)
    grad = np.einsum("maj,mai->mij", G, U)
    return val, grad


@dataclass
class LocalEstimateRecord:
    probe: BallProbe
    lam: complex
    p: float
    lhs: float
    rhs: float
    h: float
    kind: str = "caccioppoli"

    @property
    def ratio(self):
        if self.rhs > 0:
            return self.lhs / self.rhs
        return 0.0 if self.lhs == 0 else math.inf

    @property
    def degenerate(self):
        return self.rhs == 0 and self.lhs == 0

    def row(self):
        return {"probe_x": float(self.probe.center[0]), "probe_y": float(self.probe.center[1]),
                "r": float(self.probe.radius), "lambda_abs": float(abs(self.lam)), "p": float(self.p),
                "lhs": self.lhs, "rhs": self.rhs, "ratio": self.ratio, "h": self.h}


def _check_support(forcing, space, center, radius, degree=6):
    if forcing is None:
        return
    bq = ball_quadrature(space, center, radius, degree, levels=2)
    if len(bq.cells) == 0:
        return
    fv = np.asarray(forcing(bq.points[:, 0], bq.points[:, 1]))
    if np.any(np.abs(fv) > 0):
        raise SupportViolationError(f"forcing does not vanish on the ball of radius {radius:g} at {tuple(center)}")


def caccioppoli_check(ops: OperatorSet, u, probe: BallProbe, s=None, t=None, *, lam=0.0, forcing=None,
                      degree=8):
    """lhs = int_{B_s} |Du|^2, rhs = (t - s)^{-2} int_{B_t} |u|^2 (defaults s = r, t = factor r)."""
    r = probe.radius
    s = r if s is None else s
    t = probe.factor * r if t is None else t
    if not (r <= s < t <= 2 * r + 1e-14 or (probe.factor == 3 and r <= s < t <= 3 * r)):
        raise ValueError("need r <= s < t <= factor r")
    _check_support(forcing, ops.space, probe.center, t)
    full = ops.full(u)
    bs = ball_quadrature(ops.space, probe.center, s, degree)
    bt = ball_quadrature(ops.space, probe.center, t, degree)
    _, g = evaluate_on(ops.space, bs, full)
    D = 0.5 * (g + np.swapaxes(g, -1, -2))
    lhs = float(np.sum(bs.weights * np.sum(np.abs(D) ** 2, axis=(-1, -2))))
    v, _ = evaluate_on(ops.space, bt, full)
    rhs = float(np.sum(bt.weights * np.sum(np.abs(v) ** 2, axis=-1)) / (t - s) ** 2)
    return LocalEstimateRecord(probe, complex(lam), 2.0, lhs, rhs, ops.mesh.h, "caccioppoli")


def local_mean(ops, full, center, radius, p, degree):
    bq = ball_quadrature(ops.space, center, radius, degree)
    v, _ = evaluate_on(ops.space, bq, full)
    mag = np.sqrt(np.sum(np.abs(v) ** 2, axis=-1))
    return float((np.sum(bq.weights * mag ** p) / bq.measure) ** (1.0 / p))


def reverse_holder_check(ops: OperatorSet, u, probe: BallProbe, p=4, *, lam=0.0, forcing=None):
    """lhs = (mean_{B_r} |u|^p)^{1/p}, rhs = (mean_{B_{factor r}} |u|^2)^{1/2}."""
    if p < 2:
        raise ValueError("p must be at least 2")
    R = probe.factor * probe.radius
    _check_support(forcing, ops.space, probe.center, R)
    full = ops.full(u)
    deg = int(max(2 * p + 2, 8))
    lhs = local_mean(ops, full, probe.center, probe.radius, p, deg)
    rhs = local_mean(ops, full, probe.center, R, 2, 8)
    return LocalEstimateRecord(probe, complex(lam), float(p), lhs, rhs, ops.mesh.h, "reverse_holder")


# --------------------------------------------------------------------------
# study


def bump_forcing(center, radius, direction=(0.0, 1.0)):
    """Smooth compactly supported forcing exp(1 - 1/(1 - rho^2)) on B(center, radius)."""
    cx, cy = center
    d = np.asarray(direction, float)

    def f(x, y):
        rho2 = ((x - cx) ** 2 + (y - cy) ** 2) / radius ** 2
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            b = np.where(rho2 < 1.0, np.exp(1.0 - 1.0 / (1.0 - np.minimum(rho2, 1.0 - 1e-300))), 0.0)
        return np.stack([b * d[0], b * d[1]], axis=-1)
    return f


def default_probes(spec):
    """(interior probes, boundary probes, forcing) with the forcing support far from every B_{3r}."""
    if spec.kind == "disk":
        # interior balls B_2r stay inside; both families sit about 1.2 R from the forcing centre
        R = spec.R
        interior = [(0.45 * R, 0.0), (0.4 * R, 0.35 * R), (0.4 * R, -0.35 * R)]
        boundary = [(R * math.cos(a), R * math.sin(a)) for a in (-1.65, 1.6, 1.65)]
        radii = [0.08 * R, 0.12 * R, 0.16 * R]
        force = bump_forcing((-0.75 * R, 0.0), 0.15 * R, (0.0, 1.0))
    elif spec.kind == "annulus":
        R0, R1 = spec.R0, spec.R1
        rm = 0.5 * (R0 + R1)
        interior = [(rm * math.cos(a), rm * math.sin(a)) for a in (-0.2, 0.0, 0.2)]
        boundary = [(R1 * math.cos(a), R1 * math.sin(a)) for a in (-0.2, 0.0, 0.2)]
        w = R1 - R0
        radii = [0.12 * w, 0.16 * w, 0.2 * w]
        force = bump_forcing((-rm, 0.0), 0.4 * w, (0.0, 1.0))
    else:
        L, H = spec.L, spec.H
        interior = [(0.35 * L, 0.5 * H), (0.4 * L, 0.4 * H), (0.3 * L, 0.6 * H)]
        boundary = [(0.3 * L, 0.0), (0.35 * L, 0.0), (0.4 * L, 0.0)]
        radii = [0.06 * L, 0.08 * L, 0.1 * L]
        force = bump_forcing((0.85 * L, 0.5 * H), 0.2 * H, (1.0, 0.0))
    return interior, boundary, radii, force


@dataclass
class LocalStudy:
    caccioppoli: list
    reverse_holder: list

    def max_ratio(self, kind, family=None):
        recs = self.caccioppoli if kind == "caccioppoli" else self.reverse_holder
        vals = [r.ratio for r, fam in recs if family is None or fam == family]
        return max(vals) if vals else float("nan")

    def rows(self):
        return [dict(r.row(), kind=r.kind, family=fam) for r, fam in self.caccioppoli + self.reverse_holder]


def local_study(ops: OperatorSet, lams=(1.0, 10.0, 100.0), exponents=(3, 4, 6)):
    """Probe grid (3 centres x 3 radii x 3 lambdas per family) on resolvent solutions."""
    from .stokes import solve_resolvent
    spec = ops.mesh.domain
    interior, boundary, radii, force = default_probes(spec)
    cac, rhi = [], []
    for lam in lams:
        u, _, _ = solve_resolvent(ops, lam, force)
        for fam, centers in (("interior", interior), ("boundary", boundary)):
            for c in centers:
                for r in radii:
                    probe = BallProbe(tuple(c), float(r), 2).validate(spec)
                    _check_support(force, ops.space, c, 3 * r)
                    cac.append((caccioppoli_check(ops, u, probe, lam=lam), fam))
                    for p in exponents:
                        rhi.append((reverse_holder_check(ops, u, probe, p, lam=lam), fam))
    return LocalStudy(cac, rhi)
