"""navslip command line: one subcommand per experiment kind.

    navslip steady --config disk.ini --out runs --level 6
    navslip full-acceptance --threads 4

Artifacts go to <out>/<name>/: config.ini (resolved config echo), report.json,
CSV tables and SVG plots.  Exit status 0 on success, 1 when acceptance
criteria fail, 2 for configuration errors, 3 for solver errors (a FAILED
marker naming the stage is left next to the partial artifacts).
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import fields, io
from .config import KINDS, ExperimentConfig, default_config, load_config
from .discretization import SlipCoefficient, assemble
from .errors import ConfigError, NavSlipError
from .geometry import DomainSpec, build_mesh, build_mesh_level

log = logging.getLogger("navslip")


class Stage:
    """Tracks the current stage name for error reports."""

    def __init__(self):
        self.name = "setup"

    def __call__(self, name):
        self.name = name
        log.info("stage: %s", name)


# --------------------------------------------------------------------------
# config -> objects


def domain_from(cfg: ExperimentConfig) -> DomainSpec:
    d = cfg["domain"]
    if d["shape"] == "disk":
        return DomainSpec.disk(d["R"])
    if d["shape"] == "annulus":
        return DomainSpec.annulus(d["R0"], d["R1"])
    return DomainSpec.channel(d["L"], d["H"])


def alpha_from(cfg: ExperimentConfig) -> SlipCoefficient:
    a = cfg["alpha"]
    if a["kind"] == "piecewise":
        return SlipCoefficient("piecewise", a["value"], a["pieces"])
    return SlipCoefficient.constant(a["value"])


def mesh_from(cfg: ExperimentConfig, spec, level=None):
    m = cfg["mesh"]
    if level is None and m["h"] > 0:
        return build_mesh(spec, m["h"])
    return build_mesh_level(spec, level if level is not None else m["level"])


def smooth_forcing(x, y):
    return np.stack([np.cos(y) + x * y, np.sin(x) - y], axis=-1)


def forcing_from(cfg, spec):
    name, amp = cfg["data"]["field"], cfg["data"]["amplitude"]
    if name == "zero":
        return None
    if name in ("smooth", "manufactured"):
        return lambda x, y: amp * smooth_forcing(x, y)
    if name == "unit-x":
        return lambda x, y: amp * np.stack([np.ones_like(x), np.zeros_like(y)], axis=-1)
    raise ConfigError(f"data.field {name!r} is not a forcing (use smooth, unit-x, zero or manufactured)")


def velocity_from(cfg, spec):
    name, amp = cfg["data"]["field"], cfg["data"]["amplitude"]
    suite = {f.name: f for f in fields.smooth_suite(spec)}
    if name == "smooth":
        base = fields.smooth_suite(spec)[-1]
    elif name in suite:
        base = suite[name]
    elif name == "zero":
        return lambda x, y: np.zeros(np.shape(x) + (2,))
    else:
        raise ConfigError(f"data.field {name!r} is not an initial velocity for {spec.kind}; "
                          f"choose smooth, zero or one of {', '.join(sorted(suite))}")
    return lambda x, y: amp * np.asarray(base.value(x, y))


# --------------------------------------------------------------------------
# experiments: each returns (report dict, {csv name: (rows, columns)}, [plot jobs])


def run_mesh(cfg, args, stage, executor):
    spec = domain_from(cfg)
    stage("mesh")
    mesh = mesh_from(cfg, spec, args.level)
    text = mesh.export_text()
    stats = mesh.stats()
    rows = [{"quantity": k, "value": float(v)} for k, v in stats.items()]
    return {"kind": "mesh", "domain": spec.kind, "stats": stats}, {"stats": (rows, None)}, [], {"mesh.txt": text}


def run_steady(cfg, args, stage, executor):
    from .stokes import manufactured_errors, solve_steady
    spec = domain_from(cfg)
    stage("assemble")
    ops = assemble(mesh_from(cfg, spec, args.level), alpha=alpha_from(cfg))
    stage("solve")
    rep = {"kind": "steady", "domain": spec.kind, "n_velocity": ops.n}
    if cfg["data"]["field"] == "manufactured":
        _, _, rec = manufactured_errors(ops, fields.manufactured(spec))
        row = {"h": rec.h, "err_u": rec.err_u, "err_h1": rec.err_h1, "err_p": rec.err_p, "residual": rec.residual}
    else:
        sol = solve_steady(ops, forcing_from(cfg, spec))
        row = {"h": ops.mesh.h, "norm_u": ops.l2(sol.u), "norm_Du": ops.dnorm(sol.u), "norm_p": ops.pnorm(sol.p),
               "residual": sol.residual, "divergence": sol.divergence, "kernel_component": sol.kernel_component}
    rep["solution"] = row
    return rep, {"solution": ([row], None)}, [], {}


def run_resolvent_scan(cfg, args, stage, executor):
    from .stokes import SCAN_COLUMNS, resolvent_scan
    spec = domain_from(cfg)
    stage("assemble")
    ops = assemble(mesh_from(cfg, spec, args.level), alpha=alpha_from(cfg))
    stage("scan")
    r = cfg["resolvent"]
    scan = resolvent_scan(ops, forcing_from(cfg, spec), r["rays"], r["magnitudes"],
                          operator_norms=r["operator_norms"])
    rep = {"kind": "resolvent-scan", "domain": spec.kind,
           "slopes_u": {f"{k:.17g}": v for k, v in sorted(scan.slopes_u.items())},
           "slopes_Du": {f"{k:.17g}": v for k, v in sorted(scan.slopes_Du.items())},
           "constant": scan.constant}
    if r["operator_norms"]:
        rep["op_slopes_u"] = {f"{k:.17g}": v for k, v in sorted(scan.op_slopes_u.items())}
        rep["op_slopes_Du"] = {f"{k:.17g}": v for k, v in sorted(scan.op_slopes_Du.items())}
        rep["op_constant"] = scan.op_constant
    slopes = [{"ray_arg": k, "slope_u": scan.slopes_u[k], "slope_Du": scan.slopes_Du[k],
               "op_slope_u": scan.op_slopes_u.get(k, float("nan")),
               "op_slope_Du": scan.op_slopes_Du.get(k, float("nan"))} for k in sorted(scan.slopes_u)]
    plots = [("plot_resolvent_scan", "scan", "scan_norm_u.svg", {"column": "norm_u"}),
             ("plot_resolvent_scan", "scan", "scan_norm_Du.svg", {"column": "norm_Du"})]
    return rep, {"scan": (scan.rows(), list(SCAN_COLUMNS)), "slopes": (slopes, None)}, plots, {}


def _evolution(cfg, args, stage, convection):
    from .evolution import TRACE_COLUMNS, SchemeConfig, _evolve, fit_decay
    spec = domain_from(cfg)
    stage("assemble")
    ops = assemble(mesh_from(cfg, spec, args.level), alpha=alpha_from(cfg))
    s = cfg["scheme"]
    sc = SchemeConfig(s["theta"], s["dt"], s["T"], convection)
    stage("evolve")
    res = _evolve(ops, velocity_from(cfg, spec), sc, alarm=1e-6 if convection == "skew" else None)
    tr = res.trace
    rep = {"kind": "ns" if convection == "skew" else "evolve", "domain": spec.kind,
           "scheme": {"theta": sc.theta, "dt": sc.dt, "T": sc.T, "convection": sc.convection},
           "projection_defect": res.projection_defect, "kinetic_initial": float(tr.kinetic[0]),
           "kinetic_final": float(tr.kinetic[-1]), "max_relative_residual": tr.max_relative_residual()}
    if tr.kinetic[-1] > 0:
        import warnings
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            rep["decay_rate"] = fit_decay(tr)
    plots = [("plot_energy_trace", "trace", "energy.svg", {})]
    summary = [{k: v for k, v in rep.items() if isinstance(v, float)}]
    return rep, {"trace": (tr.rows(), list(TRACE_COLUMNS)), "summary": (summary, None)}, plots, {}


def run_evolve(cfg, args, stage, executor):
    return _evolution(cfg, args, stage, "none")


def run_ns(cfg, args, stage, executor):
    return _evolution(cfg, args, stage, "skew")


def run_eigen(cfg, args, stage, executor):
    import math
    from .spectral import EIG_COLUMNS, eig_alpha_table, eigensolve
    spec = domain_from(cfg)
    stage("assemble")
    ops = assemble(mesh_from(cfg, spec, args.level), alpha=alpha_from(cfg))
    k = cfg["eigen"]["k"]
    stage("eigensolve")
    eig = eigensolve(ops, k, seed=cfg.seed)
    rep = {"kind": "eigen", "domain": spec.kind, "mu": eig.mu, "gram_error": eig.gram_error(),
           "max_residual": float(eig.residuals.max())}
    pairs = [{"index": i + 1, "mu": float(m), "residual": float(r)} for i, (m, r) in
             enumerate(zip(eig.mu, eig.residuals))]
    tables = {"eigenpairs": (pairs, None)}
    grid = [a for a in cfg["alpha"]["grid"]]
    pos = [a for a in grid if a > 0]
    if len(pos) >= 2 and math.log10(max(pos) / min(pos)) >= 4 - 1e-9:
        stage("eig_alpha_table")
        tab = eig_alpha_table(ops, grid, k=min(k, 10), executor=executor)
        rep["alpha_table"] = {"monotone": tab.monotone(), "gap_slopes": tab.gap_slopes()}
        tables["eigen_alpha"] = (tab.rows(), list(EIG_COLUMNS))
        tables["gap_slopes"] = ([{"index": i + 1, "slope": s} for i, s in enumerate(tab.gap_slopes())], None)
    return rep, tables, [], {}


def run_alpha_limit(cfg, args, stage, executor):
    from .evolution import SchemeConfig
    from .limits import alpha_sweep, fit_rate, mesh_floor_estimate, vanishing_initial
    spec = domain_from(cfg)
    stage("assemble")
    ops = assemble(mesh_from(cfg, spec, args.level), alpha=SlipCoefficient.constant(1.0))
    kind = cfg["limits"]["problem"]
    s = cfg["scheme"]
    sc = SchemeConfig(s["theta"], s["dt"], s["T"], "none")
    mf = cfg["limits"]["mesh_floor"]
    if mf == "auto":
        stage("mesh floor")
        floor = mesh_floor_estimate(ops)
    else:
        floor = 0.0 if mf == "none" else float(mf)
    extra = {}
    if kind in ("steady", "resolvent"):
        data = forcing_from(cfg, spec)
    elif cfg["data"]["vanishing"]:
        stage("vanishing initial data")
        data, extra["projection_defect"] = vanishing_initial(ops, velocity_from(cfg, spec))
    else:
        data = velocity_from(cfg, spec)
    stage(f"alpha sweep ({kind})")
    rep = alpha_sweep(ops, kind, cfg["alpha"]["grid"], data=data, cfg=sc, lam=cfg["resolvent"]["lambda"],
                      mesh_floor=floor, executor=executor)
    if kind == "steady" and spec.kind == "channel" and cfg["data"]["field"] == "unit-x":
        from .limits import poiseuille_gaps
        amp2 = cfg["data"]["amplitude"] ** 2
        exact = [poiseuille_gaps(spec.L, spec.H, a) for a in rep.alpha]
        rep.notes["closed_form_boundary_gap"] = [amp2 * e[0] for e in exact]
        rep.notes["closed_form_energy_gap"] = [amp2 * e[1] for e in exact]
    stage("fit")
    fits = []
    for which in ("boundary_gap", "energy_gap", "sup_l2_gap"):
        try:
            f = rep.fit(which)
            fits.append({"gap": which, "slope": f.slope, "constant": f.constant, "residual": f.residual,
                         "window_lo": f.window[0], "window_hi": f.window[1]})
        except NavSlipError as exc:
            rep.notes[f"{which}_fit"] = str(exc)
    try:
        f = fit_rate(rep.alpha, rep.combined(), mesh_floor=floor)
        fits.append({"gap": "combined", "slope": f.slope, "constant": f.constant, "residual": f.residual,
                     "window_lo": f.window[0], "window_hi": f.window[1]})
    except NavSlipError as exc:
        rep.notes["combined_fit"] = str(exc)
    out = rep.to_json()
    out["mesh_floor"] = floor
    out.update(extra)
    out["notes"] = {k: v for k, v in sorted(rep.notes.items())}
    rows = rep.rows()
    for r, c in zip(rows, rep.combined()):
        r["combined"] = c
    for key in ("closed_form_boundary_gap", "closed_form_energy_gap"):
        if key in rep.notes:
            for r, v in zip(rows, rep.notes[key]):
                r[key] = v
    plots = [("plot_alpha_sweep", "sweep", "sweep.svg", {})]
    return out, {"sweep": (rows, None), "fits": (fits, None)}, plots, {}


def run_local_est(cfg, args, stage, executor):
    from .local_estimates import local_study
    spec = domain_from(cfg)
    stage("assemble")
    ops = assemble(mesh_from(cfg, spec, args.level), alpha=alpha_from(cfg))
    stage("local study")
    lc = cfg["local"]
    exps = tuple(int(p) if float(p).is_integer() else p for p in lc["exponents"])
    st = local_study(ops, lams=lc["lambdas"], exponents=exps)
    maxima = [{"kind": k, "family": f, "max_ratio": st.max_ratio(k, f)}
              for k in ("caccioppoli", "rhi") for f in ("interior", "boundary")]
    rep = {"kind": "local-est", "domain": spec.kind, "maxima": maxima}
    return rep, {"records": (st.rows(), None), "maxima": (maxima, None)}, [], {}


def _flatten(prefix, obj, out):
    if isinstance(obj, dict):
        for k, v in obj.items():
            _flatten(f"{prefix}.{k}" if prefix else str(k), v, out)
    elif isinstance(obj, (list, tuple)):
        for i, v in enumerate(obj):
            _flatten(f"{prefix}[{i}]", v, out)
    elif isinstance(obj, (float, int, np.floating, np.integer)) and not isinstance(obj, bool):
        out.append((prefix, float(obj)))


def run_full_acceptance(cfg, args, stage, executor):
    from . import acceptance
    stage("acceptance")
    threads = args.threads

    def factory():
        # the determinism probe repeats with the other setting
        return None if threads > 1 else ThreadPoolExecutor(max_workers=2)

    results = acceptance.run_all(executor=executor, executor_factory=factory, log=args.echo)
    rep = {"kind": "full-acceptance", "all_passed": all(r.passed for r in results),
           "criteria": [r.to_json() for r in results]}
    table = [{"criterion": r.number, "title": r.title, "passed": r.passed, "error": r.error or ""}
             for r in results]
    checks = [row for r in results for row in r.check_rows()]
    info = []
    for r in results:
        flat = []
        _flatten("", r.info, flat)
        info += [{"criterion": r.number, "key": k, "value": v} for k, v in flat]
    tables = {"acceptance": (table, None), "checks": (checks, list(acceptance.CHECK_COLUMNS)),
              "info": (info, ["criterion", "key", "value"])}
    for r in results:
        for name, rows in r.tables.items():
            if rows:
                tables[f"c{r.number:02d}_{name}"] = (rows, None)
    texts = {"acceptance.txt": "\n".join(r.line() for r in results) + "\n"}
    plots = []
    if "c02_resolvent_scan" in tables:
        plots.append(("plot_resolvent_scan", "c02_resolvent_scan", "resolvent_scan.svg", {}))
    return rep, tables, plots, texts


RUNNERS = {"mesh": run_mesh, "steady": run_steady, "resolvent-scan": run_resolvent_scan, "evolve": run_evolve,
           "ns": run_ns, "eigen": run_eigen, "alpha-limit": run_alpha_limit, "local-est": run_local_est,
           "full-acceptance": run_full_acceptance}


# --------------------------------------------------------------------------


def build_parser():
    p = argparse.ArgumentParser(prog="navslip", description="Navier-slip Stokes / Navier-Stokes laboratory")
    sub = p.add_subparsers(dest="kind", required=True)
    for kind in KINDS:
        s = sub.add_parser(kind)
        s.add_argument("--config", help="INI experiment file (defaults used when omitted)")
        s.add_argument("--out", default="runs", help="output root (default: runs)")
        s.add_argument("--threads", type=int, default=1, help="worker threads for independent samples")
        s.add_argument("--level", type=int, default=None, help="mesh refinement level (overrides mesh.level)")
        s.add_argument("--name", default=None, help="run name (overrides experiment.name)")
        s.add_argument("--no-plots", action="store_true", help="skip SVG output")
        s.add_argument("-q", "--quiet", action="store_true")
    return p


def _write_outputs(run_dir, rep, tables, plots, texts, make_plots):
    for name, (rows, cols) in tables.items():
        if rows:
            io.write_csv(os.path.join(run_dir, f"{name}.csv"), rows, cols)
    for fname, text in texts.items():
        with open(os.path.join(run_dir, fname), "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    if make_plots:
        from . import plotting
        for fn, table, fname, kw in plots:
            if tables.get(table, ([], None))[0]:
                getattr(plotting, fn)(os.path.join(run_dir, f"{table}.csv"), os.path.join(run_dir, fname), **kw)
    io.write_json(os.path.join(run_dir, "report.json"), rep)


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(message)s",
                        stream=sys.stderr)
    args.echo = None if args.quiet else (lambda line: print(line, flush=True))
    try:
        if args.threads < 1:
            raise ConfigError("--threads must be at least 1")
        if args.level is not None and args.level < 1:
            raise ConfigError("--level must be positive")
        cfg = load_config(args.config, kind=args.kind) if args.config else default_config(args.kind)
        if args.name:
            cfg.name = args.name
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    run_dir = io.ensure_dir(os.path.join(args.out, cfg.name))
    for stale in ("FAILED", "report.json"):
        if os.path.exists(os.path.join(run_dir, stale)):
            os.remove(os.path.join(run_dir, stale))
    with open(os.path.join(run_dir, "config.ini"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write(cfg.echo())
    stage = Stage()
    executor = ThreadPoolExecutor(max_workers=args.threads) if args.threads > 1 else None
    try:
        rep, tables, plots, texts = RUNNERS[args.kind](cfg, args, stage, executor)
        rep = {"experiment": {"kind": cfg.kind, "name": cfg.name, "seed": cfg.seed}, **rep}
        _write_outputs(run_dir, rep, tables, plots, texts, cfg["output"]["plots"] and not args.no_plots)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NavSlipError as exc:
        with open(os.path.join(run_dir, "FAILED"), "w", encoding="utf-8") as fh:
            fh.write(f"stage: {stage.name}\nerror: {type(exc).__name__}: {exc}\n")
        print(f"FAILED in stage '{stage.name}': {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    finally:
        if executor is not None:
            executor.shutdown()
    if args.kind == "full-acceptance" and not rep["all_passed"]:
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
