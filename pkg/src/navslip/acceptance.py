"""Acceptance criteria 1-15: each returns named checks with bounds plus detail tables.

Used by the ``full-acceptance`` CLI command and by the test suite.  Every
check value also appears in a CSV row (``checks.csv``), and detail tables are
written next to it by the runner.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import fields
from .discretization import SlipCoefficient, assemble, greens_formula_check
from .evolution import (SchemeConfig, evolve_navier_stokes, evolve_stokes, fit_decay, measure_smoothing,
                        prepare_initial)
from .geometry import DomainSpec, build_mesh_level, check_navier_curl_identity
from .limits import alpha_sweep, fit_rate, mesh_floor_estimate, vanishing_initial
from .spectral import eig_alpha_table, eigensolve, halfpower_equivalence, imaginary_power_norm
from .stokes import convergence_orders, manufactured_errors, resolvent_scan

CHECK_COLUMNS = ("criterion", "check", "value", "lower", "upper", "passed")


@dataclass
class Check:
    name: str
    value: float
    lower: float | None = None
    upper: float | None = None

    @property
    def passed(self):
        v = self.value
        if v is None or not math.isfinite(v):
            return False
        return (self.lower is None or v >= self.lower) and (self.upper is None or v <= self.upper)


@dataclass
class CriterionResult:
    number: int
    title: str
    checks: list = field(default_factory=list)
    tables: dict = field(default_factory=dict)
    info: dict = field(default_factory=dict)
    error: str | None = None
    seconds: float = 0.0

    @property
    def passed(self):
        return self.error is None and bool(self.checks) and all(c.passed for c in self.checks)

    def add(self, name, value, lower=None, upper=None):
        self.checks.append(Check(name, float(value), lower, upper))

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        worst = [c for c in self.checks if not c.passed]
        detail = self.error or (f"{len(worst)} of {len(self.checks)} checks out of bounds, first: "
                                f"{worst[0].name} = {worst[0].value:.6g}" if worst else
                                f"{len(self.checks)} checks within bounds")
        return f"criterion {self.number:2d} [{status}] {self.title}: {detail}"

    def check_rows(self):
        return [{"criterion": self.number, "check": c.name, "value": c.value,
                 "lower": float("nan") if c.lower is None else float(c.lower),
                 "upper": float("nan") if c.upper is None else float(c.upper),
                 "passed": c.passed} for c in self.checks]

    def to_json(self):
        return {"number": self.number, "title": self.title, "passed": self.passed, "error": self.error,
                "checks": [{"name": c.name, "value": c.value, "lower": c.lower, "upper": c.upper,
                            "passed": c.passed} for c in self.checks],
                "info": self.info}


def _pmap(executor, fn, items):
    items = list(items)
    if executor is None:
        return [fn(x) for x in items]
    return list(executor.map(fn, items))


def _ops(spec, level, alpha=1.0):
    return assemble(build_mesh_level(spec, level), alpha=SlipCoefficient.constant(alpha))


GEOMETRIES = (DomainSpec.disk(), DomainSpec.annulus(), DomainSpec.channel())
RESOLVENT_DOMAIN = DomainSpec.disk(2.0)
RESOLVENT_LEVEL = 10


def resolvent_forcing(x, y):
    return np.stack([np.cos(y) + x * y, np.sin(x) - y], axis=-1)


# --------------------------------------------------------------------------
# criteria


def criterion_1(executor=None):
    res = CriterionResult(1, "manufactured convergence (velocity L2 >= 2.8, pressure >= 1.8)")
    rows = []
    for spec in (DomainSpec.channel(), DomainSpec.disk()):
        case = fields.manufactured(spec)
        recs = []
        for lv in (2, 4, 8):
            _, _, rec = manufactured_errors(_ops(spec, lv), case)
            recs.append(rec)
            rows.append({"domain": spec.kind, "level": lv, "h": rec.h, "err_u": rec.err_u,
                         "err_h1": rec.err_h1, "err_p": rec.err_p, "residual": rec.residual})
        orders = convergence_orders(recs)
        res.add(f"{spec.kind} velocity L2 order (finest pair)", orders[-1]["u"], lower=2.8)
        res.add(f"{spec.kind} pressure L2 order (finest pair)", orders[-1]["p"], lower=1.8)
    res.tables["convergence"] = rows
    return res


def _scans(executor=None, alphas=(1.0, 100.0), operator_norms=True):
    spec = RESOLVENT_DOMAIN
    mesh = build_mesh_level(spec, RESOLVENT_LEVEL)

    def one(a):
        ops = assemble(mesh, alpha=SlipCoefficient.constant(a))
        return resolvent_scan(ops, resolvent_forcing, operator_norms=operator_norms)
    return dict(zip(alphas, _pmap(executor, one, alphas)))


def criteria_2_3_4(executor=None):
    """The scans are shared: 2 and 3 use alpha in {1, 1e2}, 4 uses five alphas."""
    c2 = CriterionResult(2, "resolvent decay: slope of ||u|| in [-1.05, -0.90]")
    c3 = CriterionResult(3, "gradient resolvent decay: slope of ||Du|| in [-0.60, -0.40]")
    c4 = CriterionResult(4, "alpha-uniformity: sup |lam| ||u||/||f|| within factor 2")
    full = _scans(executor, (1.0, 100.0), True)
    extra = _scans(executor, (10.0, 1000.0, 10000.0), False)
    rows = []
    for a, scan in sorted({**full, **extra}.items()):
        rows.extend(scan.rows())
    for a, scan in full.items():
        for arg in sorted(scan.slopes_u):
            tag = f"alpha={a:g} arg={arg:.4f}"
            c2.add(f"slope ||u|| {tag}", scan.slopes_u[arg], -1.05, -0.90)
            c3.add(f"slope sup_f ||Du||/||f|| {tag}", scan.op_slopes_Du[arg], -0.60, -0.40)
            c2.info.setdefault("operator_norm_slopes_u", {})[tag] = scan.op_slopes_u[arg]
            c3.info.setdefault("fixed_f_slopes_Du", {})[tag] = scan.slopes_Du[arg]
    consts = {a: s.constant for a, s in sorted({**full, **extra}.items())}
    for a, cst in consts.items():
        c4.info[f"constant alpha={a:g}"] = cst
    vals = list(consts.values())
    c4.add("max/min of constants over alpha in {1,...,1e4}", max(vals) / min(vals), upper=2.0)
    op = {a: s.op_constant for a, s in full.items()}
    c4.info["operator_norm_constants"] = {f"alpha={a:g}": v for a, v in op.items()}
    c2.tables["resolvent_scan"] = rows
    return c2, c3, c4


def _kernel_filtered(ops, u):
    R = ops.kernel_modes()
    for j in range(R.shape[1]):
        r = R[:, j]
        u = u - (r @ (ops.M @ u)) / (r @ (ops.M @ r)) * r
    return u


def criterion_5(executor=None):
    res = CriterionResult(5, "linear energy identity |residual| <= 1e-8 kinetic(0)")
    cfg = SchemeConfig(0.5, 0.01, 0.5)
    jobs = []
    for spec in GEOMETRIES:
        alphas = (1.0, 1000.0) if spec.kind == "disk" else (0.0, 1.0, 1000.0)
        jobs.extend((spec, a) for a in alphas)

    def one(job):
        spec, a = job
        ops = _ops(spec, 4, a)
        u0, _ = prepare_initial(ops, fields.smooth_suite(spec)[-1].value)
        if a == 0:
            u0 = _kernel_filtered(ops, u0)
        tr = evolve_stokes(ops, u0, cfg).trace
        return tr.max_relative_residual(), tr
    out = _pmap(executor, one, jobs)
    rows = []
    for (spec, a), (r, tr) in zip(jobs, out):
        res.add(f"{spec.kind} alpha={a:g}", r, upper=1e-8)
        for row in tr.rows()[:: 10]:
            rows.append({"domain": spec.kind, "alpha": a, **row})
    res.tables["energy_traces"] = rows
    return res


def criterion_6(executor=None):
    res = CriterionResult(6, "Navier-Stokes energy equality |residual| <= 1e-6 kinetic(0)")
    cfg = SchemeConfig(0.5, 0.01, 0.5, "skew")
    reynolds = 50.0

    def one(spec):
        ops = _ops(spec, 4, 1.0)
        base = fields.smooth_suite(spec)[-1]
        full = ops.space.interpolate(base.value)
        amp = reynolds / (np.abs(full).max() * spec.diameter)
        u0, _ = prepare_initial(ops, lambda x, y: amp * base.value(x, y))
        tr = evolve_navier_stokes(ops, u0, cfg).trace
        return tr.max_relative_residual(), amp * np.abs(full).max() * spec.diameter, tr
    rows = []
    for spec, (r, re, tr) in zip(GEOMETRIES, _pmap(executor, one, GEOMETRIES)):
        res.add(f"{spec.kind} skew NS", r, upper=1e-6)
        res.info[f"{spec.kind} initial Reynolds number"] = re
        for row in tr.rows()[:: 10]:
            rows.append({"domain": spec.kind, **row})
    res.tables["ns_traces"] = rows
    return res


def criterion_7(executor=None):
    res = CriterionResult(7, "decay rate vs mu1 (2% eigenfunction, 5% mixture)")
    rows = []
    for spec in (DomainSpec.disk(), DomainSpec.channel()):
        ops = _ops(spec, 4, 1.0)
        eig = eigensolve(ops, 5)
        mu1 = eig.mu[0]
        d1 = fit_decay(evolve_stokes(ops, eig.phi[:, 0], SchemeConfig(0.5, 0.01, 2.0)).trace)
        d2 = fit_decay(evolve_stokes(ops, eig.phi @ np.ones(eig.k), SchemeConfig(0.5, 0.01, 3.0)).trace)
        res.add(f"{spec.kind} |delta/mu1 - 1| eigenfunction", abs(d1 / mu1 - 1), upper=0.02)
        res.add(f"{spec.kind} |delta/mu1 - 1| mixture", abs(d2 / mu1 - 1), upper=0.05)
        rows.append({"domain": spec.kind, "mu1": mu1, "delta_eigenfunction": d1, "delta_mixture": d2})
    res.tables["decay"] = rows
    return res


def criterion_8(executor=None):
    res = CriterionResult(8, "smoothing suprema stable within 10% under dt halving (k = 30 mixture)")
    ops = _ops(DomainSpec.disk(), 4, 1.0)
    eig = eigensolve(ops, 30)
    c = np.ones(eig.k) / math.sqrt(eig.k)
    u0 = eig.phi @ c
    T = 0.5
    recs = []
    rows = []
    for m in (9, 10):
        dt = T / 2 ** m
        tr = evolve_stokes(ops, u0, SchemeConfig(0.5, dt, T)).trace
        s = measure_smoothing(tr, ops.l2(u0))
        recs.append(s)
        rows.append({"dt": dt, "sup_sqrt_t_Du": s.sup_sqrt_t_Du, "sup_t_dudt": s.sup_t_dudt})
    a = [r.sup_sqrt_t_Du for r in recs]
    b = [r.sup_t_dudt for r in recs]
    res.add("relative change sup sqrt(t)||Du||/||u0||", abs(a[1] / a[0] - 1), upper=0.10)
    res.add("relative change sup t||du/dt||/||u0||", abs(b[1] / b[0] - 1), upper=0.10)
    res.add("sup sqrt(t)||Du||/||u0|| (finest)", a[1], lower=0.0, upper=1e6)
    res.add("sup t||du/dt||/||u0|| (finest)", b[1], lower=0.0, upper=1e6)
    ts = recs[1].times
    mu = eig.mu
    res.info["oracle sup t||du/dt||"] = float(max(t * math.sqrt(np.sum(mu ** 2 * np.exp(-2 * mu * t) * c ** 2))
                                                  for t in ts))
    res.info["oracle sup sqrt(t)||A^1/2 u||"] = float(max(math.sqrt(t * np.sum(mu * np.exp(-2 * mu * t) * c ** 2))
                                                          for t in ts))
    res.tables["smoothing"] = rows
    return res


def criterion_9_10(executor=None):
    c9 = CriterionResult(9, "square-root domain: Parseval <= 1e-10, c2/c1 stable within 25%")
    c10 = CriterionResult(10, "imaginary powers: ||A^is|| = 1 +- 1e-10")
    ratios, rows = [], []
    for lv in (4, 8):
        ops = _ops(DomainSpec.disk(), lv, 1.0)
        eig = eigensolve(ops, 30)
        hp = halfpower_equivalence(eig)
        c9.add(f"level {lv} Parseval error", hp.parseval_error, upper=1e-10)
        ratios.append(hp.c2 / hp.c1)
        rows.append({"level": lv, "c1": hp.c1, "c2": hp.c2, "ratio": hp.c2 / hp.c1,
                     "parseval_error": hp.parseval_error})
        if lv == 4:
            for s in (1.0, -1.0, 5.0, -5.0):
                c10.add(f"|norm - 1| s={s:g}", abs(imaginary_power_norm(eig, s) - 1.0), upper=1e-10)
    c9.add("c1 (coarse)", rows[0]["c1"], lower=1e-12)
    c9.add("|ratio(fine)/ratio(coarse) - 1|", abs(ratios[1] / ratios[0] - 1), upper=0.25)
    c9.tables["halfpower"] = rows
    return c9, c10


SWEEP_LEVEL = 10
SWEEP_ALPHAS = tuple(np.logspace(0.0, 4.0, 17))


def _u_smooth(x, y):
    return np.stack([-y * (1 + x), x * (1 + x) + 0.5 * np.sin(y)], axis=-1)


def _u_vanish(x, y):
    return np.stack([-y * (1 + x), x * (1 + x)], axis=-1)


def criterion_11(executor=None):
    res = CriterionResult(11, "alpha -> infinity: gap slopes <= -0.95 over the top two decades")
    ops = _ops(DomainSpec.disk(), SWEEP_LEVEL, 1.0)
    floor = mesh_floor_estimate(ops)
    cfg = SchemeConfig(0.5, 0.01, 0.5)
    res.info["mesh_floor"] = floor
    uv, defect = vanishing_initial(ops, _u_vanish)
    res.info["vanishing projection defect"] = defect
    rows = []
    rep = alpha_sweep(ops, "stokes_evolution", SWEEP_ALPHAS, data=_u_smooth, cfg=cfg, mesh_floor=floor,
                      executor=executor)
    fit = rep.fit("boundary_gap")
    res.add("Stokes smooth u0: boundary gap slope", fit.slope, upper=-0.95)
    res.info["Stokes smooth u0: boundary gap fit residual"] = fit.residual
    rows += [{"run": "stokes_smooth", **r} for r in rep.rows()]
    res.info["stokes_smooth"] = rep.to_json()
    for kind, tag in (("stokes_evolution", "Stokes"), ("ns_evolution", "NS")):
        rep = alpha_sweep(ops, kind, SWEEP_ALPHAS, data=uv, cfg=cfg, mesh_floor=floor, executor=executor)
        comb = fit_rate(rep.alpha, rep.combined(), mesh_floor=floor)
        res.add(f"{tag} vanishing u0: combined gap slope", comb.slope, upper=-0.95)
        res.info[f"{tag} vanishing u0: combined fit residual"] = comb.residual
        if kind == "ns_evolution":
            res.add("NS vanishing u0: energy gap slope", rep.fit("energy_gap").slope, upper=-0.95)
            res.add("NS vanishing u0: sup-L2 gap slope", rep.fit("sup_l2_gap").slope, upper=-0.95)
        rows += [{"run": f"{kind}_vanishing", **r, "combined": c} for r, c in zip(rep.rows(), rep.combined())]
        info = rep.to_json()
        info["combined_fit"] = {"slope": comb.slope, "constant": comb.constant, "residual": comb.residual,
                                "excluded": comb.excluded}
        res.info[f"{kind}_vanishing"] = info
    for r in rows:
        r.setdefault("combined", r["energy_gap"] + r["boundary_gap"])
    res.tables["alpha_sweeps"] = rows
    return res


def criterion_12(executor=None):
    res = CriterionResult(12, "eigenvalue limit: mu1 nondecreasing, mu1(1e6) within 1% of Dirichlet")
    ops = _ops(DomainSpec.disk(), 8, 1.0)
    alphas = [0.0, 1.0, 10.0, 100.0, 1e3, 1e4, 1e5, 1e6]
    tab = eig_alpha_table(ops, alphas, k=5, executor=executor)
    mu1 = tab.mu[:, 0]
    res.add("min increment of mu1 over the grid", float(np.min(np.diff(mu1))), lower=-1e-10)
    res.add("|mu1(1e6) - mu1_D| / mu1_D", abs(mu1[-1] - tab.mu_dirichlet[0]) / tab.mu_dirichlet[0], upper=0.01)
    res.info["gap_slopes"] = tab.gap_slopes()
    res.tables["eig_alpha"] = tab.rows()
    return res


def criterion_13(executor=None):
    res = CriterionResult(13, "curl identity and Green's formula: order >= 1 or below 1e-10")
    spec = DomainSpec.disk()
    levels = (2, 4, 8)
    suite = fields.smooth_suite(spec)
    table = {(f.name, kind): [] for f in suite for kind in ("curl_identity", "green")}
    hs = []
    for lv in levels:
        ops = _ops(spec, lv, 1.0)
        hs.append(ops.mesh.h)
        for f in suite:
            table[(f.name, "curl_identity")].append(check_navier_curl_identity(ops.mesh, ops.frame, f))
            table[(f.name, "green")].append(greens_formula_check(ops, f, fields.ZERO_PRESSURE))
    rows = []
    for (name, kind), vals in table.items():
        for lv, h, v in zip(levels, hs, vals):
            rows.append({"field": name, "check": kind, "level": lv, "h": h, "residual": v})
        if max(vals) <= 1e-10:
            res.add(f"{kind} {name}: max residual (exact case)", max(vals), upper=1e-10)
        else:
            order = math.log(vals[-2] / vals[-1]) / math.log(hs[-2] / hs[-1])
            res.add(f"{kind} {name}: observed order", order, lower=1.0)
    res.add("green rigid_rotation: max residual", max(table[("rigid_rotation", "green")]), upper=1e-10)
    res.tables["identities"] = rows
    return res


def criterion_14(executor=None):
    from .local_estimates import local_study
    res = CriterionResult(14, "local estimates: ratio tables stable within 2x across levels and families")
    spec = DomainSpec.disk()
    maxima = {}
    rows = []
    for lv in (4, 8):
        st = local_study(_ops(spec, lv, 1.0))
        for kind in ("caccioppoli", "rhi"):
            for fam in ("interior", "boundary"):
                maxima[(lv, kind, fam)] = st.max_ratio(kind, fam)
        rows += [{"level": lv, **r} for r in st.rows()]
    for kind in ("caccioppoli", "rhi"):
        for fam in ("interior", "boundary"):
            a, b = maxima[(4, kind, fam)], maxima[(8, kind, fam)]
            res.add(f"{kind} {fam}: level ratio max/min", max(a, b) / min(a, b), upper=2.0)
        for lv in (4, 8):
            a, b = maxima[(lv, kind, "interior")], maxima[(lv, kind, "boundary")]
            res.add(f"{kind} level {lv}: family ratio max/min", max(a, b) / min(a, b), upper=2.0)
    res.info["maxima"] = {f"{lv} {k} {f}": v for (lv, k, f), v in maxima.items()}
    res.tables["local_records"] = rows
    return res


def criterion_15(results_parallel: dict, executor_factory):
    """Repeat the thread-parallel criteria serially (or threaded, if the first pass was serial) and
    compare their serialized results byte for byte."""
    from .io import dumps_json
    res = CriterionResult(15, "determinism: threaded and serial results byte-identical")
    for num, fn in ((12, criterion_12), (5, criterion_5)):
        ex = executor_factory()
        try:
            again = fn(ex)
        finally:
            if ex is not None:
                ex.shutdown()
        a = dumps_json([results_parallel[num].to_json(), results_parallel[num].tables])
        b = dumps_json([again.to_json(), again.tables])
        res.add(f"criterion {num} repeat mismatch (bytes)", float(sum(x != y for x, y in zip(a, b))
                                                                   + abs(len(a) - len(b))), upper=0.0)
    return res


STAGES = [
    ("1", criterion_1), ("2-4", criteria_2_3_4), ("5", criterion_5), ("6", criterion_6), ("7", criterion_7),
    ("8", criterion_8), ("9-10", criterion_9_10), ("11", criterion_11), ("12", criterion_12),
    ("13", criterion_13), ("14", criterion_14),
]


def run_all(executor=None, executor_factory=None, only=None, log=print):
    """Run the criteria in order; stage failures become failed results with the error recorded."""
    from .errors import NavSlipError
    results = {}
    for tag, fn in STAGES:
        nums = [int(x) for x in range(int(tag.split("-")[0]), int(tag.split("-")[-1]) + 1)]
        if only is not None and not set(nums) & set(only):
            continue
        t0 = time.perf_counter()
        try:
            out = fn(executor)
            out = out if isinstance(out, tuple) else (out,)
        except (NavSlipError, ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
            out = tuple(CriterionResult(n, f"stage {tag}", error=f"{type(exc).__name__}: {exc}") for n in nums)
        dt = time.perf_counter() - t0
        for r in out:
            r.seconds = dt / len(out)
            results[r.number] = r
            if log:
                log(r.line())
    if only is None or 15 in only:
        t0 = time.perf_counter()
        if executor_factory is None:
            executor_factory = lambda: None  # noqa: E731
        if 5 in results and 12 in results:
            r = criterion_15(results, executor_factory)
        else:
            r = CriterionResult(15, "determinism", error="criteria 5 and 12 are needed")
        r.seconds = time.perf_counter() - t0
        results[15] = r
        if log:
            log(r.line())
    return [results[k] for k in sorted(results)]
