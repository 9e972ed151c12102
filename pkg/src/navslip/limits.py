"""Large-slip limit: sweep alpha, compare with the no-slip twin, fit the 1/alpha rates."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .discretization import OperatorSet, SlipCoefficient
from .errors import DegenerateFitError, NavSlipError
from .evolution import SchemeConfig, _evolve, prepare_initial

KINDS = ("steady", "resolvent", "stokes_evolution", "ns_evolution")


@dataclass
class FitResult:
    slope: float
    constant: float
    residual: float
    window: tuple
    excluded: list = field(default_factory=list)


def fit_rate(alphas, gaps, *, decades=2.0, min_points=4, flatten=0.9, mesh_floor=0.0):
    """Least-squares slope of log gap vs log alpha over the top `decades` of the grid.

    The window is fixed by the grid (largest alpha / 10**decades upward).
    Inside it, points whose gap is at or below `mesh_floor` are excluded, and
    the top is trimmed while the local slope there is flatter than `flatten`
    times the slope of the rest (a solver floor has been reached).
    """
    a = np.asarray(alphas, float)
    g = np.asarray(gaps, float)
    order = np.argsort(a)
    a, g = a[order], g[order]
    excluded = [float(x) for x in a[(g <= mesh_floor) | (g <= 0)]]
    keep = (g > mesh_floor) & (g > 0)
    lo = a.max() / 10.0 ** decades * (1 - 1e-12) if len(a) else 0.0
    a, g = a[keep], g[keep]
    # floor detection from the top
    while len(a) >= min_points + 1:
        la, lg = np.log(a), np.log(g)
        top = (lg[-1] - lg[-2]) / (la[-1] - la[-2])
        rest = np.polyfit(la[:-1], lg[:-1], 1)[0]
        if rest < 0 and top > flatten * rest:
            excluded.append(float(a[-1]))
            a, g = a[:-1], g[:-1]
        else:
            break
    sel = a >= lo
    if sel.sum() < min_points:
        raise DegenerateFitError(f"only {int(sel.sum())} usable points in the fit window (need {min_points}); "
                                 f"excluded {sorted(excluded)}")
    la, lg = np.log(a[sel]), np.log(g[sel])
    coef = np.polyfit(la, lg, 1)
    resid = lg - np.polyval(coef, la)
    return FitResult(slope=float(coef[0]), constant=float(np.max(a[sel] * g[sel])),
                     residual=float(np.sqrt(np.mean(resid ** 2))), window=(float(a[sel][0]), float(a[sel][-1])),
                     excluded=sorted(excluded))


# --------------------------------------------------------------------------
# gap norms on the full nodal space


class GapNorms:
    def __init__(self, ops: OperatorSet):
        sp = ops.space
        fo = sp.full_operators
        self.M, self.K, self.G = fo["M"], fo["K"], fo["Grad"]
        cell, N, _ = sp.boundary_basis(ops.frame)
        self.bdofs = sp.cell_nodes[cell]
        self.N = N
        self.w = ops.frame.weight

    def l2sq(self, d):
        return float(d @ (self.M @ d))

    def dsq(self, d):
        """||D d||^2 (K encodes 2 (Du, Dv))."""
        return 0.5 * float(d @ (self.K @ d))

    def h1sq(self, d):
        return float(d @ (self.M @ d) + d @ (self.G @ d))

    def boundary_sq(self, d):
        U = d.reshape(-1, 2)[self.bdofs]
        v = np.einsum("qa,qai->qi", self.N, U)
        return float(np.sum(self.w * np.sum(v * v, axis=-1)))


@dataclass
class AlphaSweepReport:
    kind: str
    alpha: list
    boundary_gap: list
    energy_gap: list
    h1_gap: list
    sup_l2_gap: list = field(default_factory=list)
    fits: dict = field(default_factory=dict)
    excluded_points: list = field(default_factory=list)
    mesh_floor: float = 0.0
    notes: dict = field(default_factory=dict)

    def fit(self, which="boundary_gap", **kw):
        kw.setdefault("mesh_floor", self.mesh_floor)
        res = fit_rate(self.alpha, getattr(self, which), **kw)
        self.fits[which] = res
        for x in res.excluded:
            if x not in self.excluded_points:
                self.excluded_points.append(x)
        return res

    def combined(self):
        return [e + b for e, b in zip(self.energy_gap, self.boundary_gap)]

    def to_json(self):
        primary = self.fits.get("boundary_gap") or next(iter(self.fits.values()), None)
        out = {"kind": self.kind, "alpha": list(map(float, self.alpha)),
               "boundary_gap": list(map(float, self.boundary_gap)),
               "energy_gap": list(map(float, self.energy_gap)), "h1_gap": list(map(float, self.h1_gap)),
               "slope": primary.slope if primary else None,
               "constant": primary.constant if primary else None,
               "residual": primary.residual if primary else None,
               "excluded_points": sorted(self.excluded_points)}
        if self.sup_l2_gap:
            out["sup_l2_gap"] = list(map(float, self.sup_l2_gap))
        out["fits"] = {k: {"slope": v.slope, "constant": v.constant, "residual": v.residual,
                           "window": list(v.window)} for k, v in sorted(self.fits.items())}
        return out

    def rows(self):
        rows = []
        for i, a in enumerate(self.alpha):
            r = {"alpha": float(a), "boundary_gap": self.boundary_gap[i], "energy_gap": self.energy_gap[i],
                 "h1_gap": self.h1_gap[i]}
            if self.sup_l2_gap:
                r["sup_l2_gap"] = self.sup_l2_gap[i]
            rows.append(r)
        return rows


def vanishing_initial(ops: OperatorSet, field_fn, width=None):
    """Discretely divergence-free field that is zero on Gamma: bump-weighted field projected in the no-slip space.

    Returns (slip-space coefficients, relative projection defect).
    """
    spec = ops.mesh.domain
    width = width if width is not None else 0.25 * spec.feature_size
    charts = ops.mesh.charts

    def g(x, y):
        pts = np.stack([x, y], axis=-1)
        d = np.min([ch.distance(pts) for ch in charts], axis=0)
        b = np.clip(d / width, 0.0, 1.0) ** 2 * (3.0 - 2.0 * np.clip(d / width, 0.0, 1.0))
        return b[..., None] * np.asarray(field_fn(x, y))

    dops = ops.dirichlet()
    ud, defect = prepare_initial(dops, g)
    full = ops.space.interpolate(g)
    nrm = math.sqrt(max(full @ (ops.Mfull @ full), 1e-300))
    return ops.cspace.project_nodal(dops.full(ud)), defect / nrm


def _twin_initial(ops, dops, u0):
    """Initial data for slip and no-slip runs."""
    if callable(u0):
        us, _ = prepare_initial(ops, u0)
        ud, _ = prepare_initial(dops, u0)
        return us, ud
    u0 = np.asarray(u0, float)
    # slip coefficients; exact restriction when the field vanishes at boundary nodes
    full = ops.full(u0)
    ud, _ = prepare_initial(dops, dops.cspace.project_nodal(full))
    return u0, ud


def alpha_sweep(ops: OperatorSet, kind: str, alphas, *, data=None, cfg: SchemeConfig | None = None,
                lam=1.0, mesh_floor=0.0, executor=None):
    """Gaps between slip solutions and the no-slip twin over an alpha grid.

    data is the forcing (steady/resolvent) or the initial velocity (evolution
    kinds).  `executor` (a concurrent.futures executor) may run alpha samples
    concurrently; results are assembled in grid order.
    """
    if kind not in KINDS:
        raise ValueError(f"unknown sweep kind {kind!r}")
    alphas = [float(a) for a in sorted(alphas)]
    if alphas[0] <= 0 or math.log10(alphas[-1] / alphas[0]) < 4 - 1e-9:
        raise ValueError("alpha grid must be positive and span at least four decades")
    dops = ops.dirichlet()
    norms = GapNorms(ops)
    from .stokes import rhs_vector

    if kind in ("steady", "resolvent"):
        lam_k = 0.0 if kind == "steady" else lam
        Fd = rhs_vector(dops, data) if callable(data) or data is None else dops.cspace.restrict(
            ops.Mfull @ ops.full(np.asarray(data)))
        from .stokes import resolvent_system
        ud, _, _ = resolvent_system(dops, lam_k).solve(Fd)
        ud_full = dops.full(ud)

        def job(a):
            opa = ops.with_alpha(SlipCoefficient.constant(a))
            from .stokes import solve_resolvent, solve_steady
            try:
                if lam_k == 0:
                    u = solve_steady(opa, data).u
                else:
                    u = solve_resolvent(opa, lam_k, data)[0]
            except NavSlipError as exc:
                raise type(exc)(f"alpha={a:g}: {exc}") from exc
            d = opa.full(np.real(u)) - ud_full
            return norms.boundary_sq(d), norms.l2sq(d) + norms.dsq(d), norms.h1sq(d), norms.l2sq(d)
    else:
        cfg = cfg or SchemeConfig(0.5, 0.01, 0.5)
        conv = "skew" if kind == "ns_evolution" else "none"
        cfg = SchemeConfig(cfg.theta, cfg.dt, cfg.T, conv)
        us0, ud0 = _twin_initial(ops, dops, data)
        dres = _evolve(dops, ud0, cfg, store=True)
        dstates = [dops.full(s) for s in dres.states]
        mid = cfg.theta == 0.5

        def job(a):
            opa = ops.with_alpha(SlipCoefficient.constant(a))
            try:
                res = _evolve(opa, us0, cfg, store=True, alarm=1e-6 if conv == "skew" else None)
            except NavSlipError as exc:
                raise type(exc)(f"alpha={a:g}: {exc}") from exc
            diffs = [opa.full(s) - d for s, d in zip(res.states, dstates)]
            bgap = dgap = hgap = 0.0
            for n in range(1, len(diffs)):
                de = 0.5 * (diffs[n] + diffs[n - 1]) if mid else diffs[n]
                bgap += cfg.dt * norms.boundary_sq(de)
                dgap += cfg.dt * norms.dsq(de)
                hgap += cfg.dt * norms.h1sq(de)
            sup = max(norms.l2sq(d) for d in diffs)
            return bgap, sup + dgap, hgap, sup

    results = list(executor.map(job, alphas)) if executor is not None else [job(a) for a in alphas]
    rep = AlphaSweepReport(kind=kind, alpha=alphas, boundary_gap=[r[0] for r in results],
                           energy_gap=[r[1] for r in results], h1_gap=[r[2] for r in results],
                           sup_l2_gap=[r[3] for r in results], mesh_floor=mesh_floor)
    return rep


# --------------------------------------------------------------------------
# slip Poiseuille closed form


def slip_poiseuille(H, alpha):
    """u(y) for -u'' = 1 on (0, H) with u' = alpha u at y = 0 and u' = -alpha u at y = H."""
    c = H / (2.0 * alpha) if alpha > 0 else math.inf
    return lambda y: 0.5 * y * (H - y) + c


def poiseuille_gaps(L, H, alpha):
    """Closed-form (boundary, energy, H1, L2) squared gaps between slip and no-slip Poiseuille."""
    c = H / (2.0 * alpha)
    l2 = c * c * L * H
    return 2.0 * L * c * c, l2, l2, l2


def steady_alpha_limit(ops: OperatorSet, alphas, f=None, *, executor=None):
    """Steady sweep; on the channel with f = (1, 0) the closed form is attached in notes."""
    if f is None:
        f = lambda x, y: np.stack([np.ones_like(x), np.zeros_like(y)], axis=-1)  # noqa: E731
    rep = alpha_sweep(ops, "steady", alphas, data=f, executor=executor)
    spec = ops.mesh.domain
    if spec.kind == "channel":
        exact = [poiseuille_gaps(spec.L, spec.H, a) for a in rep.alpha]
        rep.notes["closed_form_boundary_gap"] = [e[0] for e in exact]
        rep.notes["closed_form_energy_gap"] = [e[1] for e in exact]
    return rep


def mesh_floor_estimate(ops: OperatorSet, factor=10.0):
    """factor x squared L2 velocity error of the manufactured case on this mesh (alpha = 1).

    Gap points at or below this level are excluded from rate fits, so the fit
    never follows the discretization error.
    """
    from .fields import manufactured
    from .stokes import manufactured_errors
    opa = ops.with_alpha(SlipCoefficient.constant(1.0))
    _, _, rec = manufactured_errors(opa, manufactured(ops.mesh.domain))
    return factor * rec.err_u ** 2
