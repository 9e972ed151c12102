"""Time stepping for slip-Stokes and Navier-Stokes with exact discrete energy accounting.

One step of the theta-scheme solves

    (M + theta dt A_n) u^{n+1} + dt D^T p = (M - (1 - theta) dt A_n) u^n + dt F^{n+theta}
    D u^{n+1} = 0

with A_n = K + B (+ C(u^n) for Navier-Stokes, C the skew convection matrix).
For theta = 1/2 the balance is evaluated at u^{n+1/2} = (u^n + u^{n+1}) / 2:

    1/2 |u^{n+1}|^2 - 1/2 |u^n|^2 + dt a(u^{n+1/2}, u^{n+1/2}) = dt <F^{n+1/2}, u^{n+1/2}>

exactly (C drops out by skew-symmetry), so the residual is solver roundoff.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad

from .discretization import OperatorSet
from .errors import DivergenceAlarm, SolverError, StepFailureError
from .linalg import SaddleSystem

TRACE_COLUMNS = ("time", "kinetic", "cum_dissipation", "cum_friction", "norm_Du", "norm_dudt",
                 "energy_residual")


@dataclass(frozen=True)
class SchemeConfig:
    theta: float = 0.5
    dt: float = 0.01
    T: float = 0.5
    convection: str = "none"

    def __post_init__(self):
        if self.theta not in (0.5, 1.0):
            raise ValueError("theta must be 1/2 or 1")
        if not (self.dt > 0 and self.T > 0 and self.dt < self.T):
            raise ValueError("need 0 < dt < T")
        if self.convection not in ("none", "skew"):
            raise ValueError("convection must be 'none' or 'skew'")

    @property
    def steps(self):
        return int(round(self.T / self.dt))


@dataclass
class EvolutionTrace:
    times: np.ndarray
    kinetic: np.ndarray
    dissipation: np.ndarray     # per-step increments (0 at t = 0)
    friction: np.ndarray
    work: np.ndarray
    norm_Du: np.ndarray
    norm_dudt: np.ndarray
    alpha_max: float = 0.0

    @property
    def cum_dissipation(self):
        return np.cumsum(self.dissipation)

    @property
    def cum_friction(self):
        return np.cumsum(self.friction)

    @property
    def energy_residual(self):
        return (self.kinetic + self.cum_dissipation + self.cum_friction - np.cumsum(self.work)
                - self.kinetic[0])

    def max_relative_residual(self):
        k0 = self.kinetic[0]
        return float(np.abs(self.energy_residual).max() / k0) if k0 > 0 else float(np.abs(self.energy_residual).max())

    def rows(self):
        cd, cf, er = self.cum_dissipation, self.cum_friction, self.energy_residual
        return [{"time": float(t), "kinetic": float(k), "cum_dissipation": float(d), "cum_friction": float(f),
                 "norm_Du": float(g), "norm_dudt": float(s), "energy_residual": float(r)}
                for t, k, d, f, g, s, r in zip(self.times, self.kinetic, cd, cf, self.norm_Du,
                                               self.norm_dudt, er)]


@dataclass
class EvolutionResult:
    trace: EvolutionTrace
    u: np.ndarray
    projection_defect: float
    states: list = field(default_factory=list)


def prepare_initial(ops: OperatorSet, u0, tol=1e-10):
    """Discretely divergence-free reduced u0 and the size of the correction applied."""
    if callable(u0):
        full = ops.space.interpolate(u0)
        sys = ops.projector()
        u, _, _ = sys.solve(ops.cspace.restrict(ops.Mfull @ full))
        e = full - ops.full(u)
        return u, float(np.sqrt(max(e @ (ops.Mfull @ e), 0.0)))
    u0 = np.asarray(u0, dtype=float)
    nrm = np.linalg.norm(ops.D @ u0)
    scale = max(ops.l2(u0), 1e-300) * max(np.sqrt(ops.D.multiply(ops.D).sum()), 1e-300)
    if nrm <= tol * scale:
        return u0.copy(), 0.0
    u, _, _ = ops.projector().solve(ops.M @ u0)
    return u, ops.l2(u0 - u)


def _evolve(ops: OperatorSet, u0, cfg: SchemeConfig, load=None, *, store=False, alarm=None):
    u, defect = prepare_initial(ops, u0)
    th, dt = cfg.theta, cfg.dt
    nsteps = cfg.steps
    A, M = ops.A, ops.M
    mid = th == 0.5
    linear_sys = None if cfg.convection == "skew" else SaddleSystem(M + th * dt * A, ops.D, ops.mean)
    times = np.arange(nsteps + 1) * dt
    kin = np.empty(nsteps + 1)
    diss = np.zeros(nsteps + 1)
    fric = np.zeros(nsteps + 1)
    work = np.zeros(nsteps + 1)
    gD = np.empty(nsteps + 1)
    dudt = np.zeros(nsteps + 1)
    kin[0] = 0.5 * ops.l2(u) ** 2
    gD[0] = ops.dnorm(u)
    states = [u.copy()] if store else []
    F_old = load(0.0) if load is not None else None
    for n in range(nsteps):
        t1 = times[n + 1]
        if cfg.convection == "skew":
            C = ops.convection(u)
            An = (A + C).tocsr()
            sys = SaddleSystem(M + th * dt * An, ops.D, ops.mean)
        else:
            An, sys = A, linear_sys
        rhs = M @ u - (1.0 - th) * dt * (An @ u)
        F_new = load(t1) if load is not None else None
        if load is not None:
            Fth = th * F_new + (1.0 - th) * F_old
            rhs = rhs + dt * Fth
        try:
            u_new, _, _ = sys.solve(rhs)
        except SolverError as exc:
            raise StepFailureError(f"step to t={t1:.6g} failed: {exc}", time=t1) from exc
        if not np.all(np.isfinite(u_new)):
            raise StepFailureError(f"non-finite state at t={t1:.6g}", time=t1)
        ue = 0.5 * (u + u_new) if mid else u_new
        kin[n + 1] = 0.5 * ops.l2(u_new) ** 2
        diss[n + 1] = dt * float(ue @ (ops.K @ ue))
        fric[n + 1] = dt * float(ue @ (ops.B @ ue))
        if load is not None:
            work[n + 1] = dt * float(np.real(Fth @ ue))
        gD[n + 1] = ops.dnorm(u_new)
        dudt[n + 1] = ops.l2(u_new - u) / dt
        if alarm is not None and load is None and kin[n + 1] > kin[n] * (1.0 + alarm):
            raise DivergenceAlarm(f"kinetic energy grew at t={t1:.6g}", time=t1)
        u = u_new
        F_old = F_new
        if store:
            states.append(u.copy())
    amax = float(ops.alpha_values.max(initial=0.0))
    trace = EvolutionTrace(times=times, kinetic=kin, dissipation=diss, friction=fric, work=work,
                           norm_Du=gD, norm_dudt=dudt, alpha_max=amax)
    return EvolutionResult(trace=trace, u=u, projection_defect=defect, states=states)


def evolve_stokes(ops: OperatorSet, u0, cfg: SchemeConfig, load=None, *, store=False):
    """Linear slip-Stokes evolution; `load(t)` returns a reduced load vector (or None for f = 0)."""
    if cfg.convection != "none":
        cfg = SchemeConfig(cfg.theta, cfg.dt, cfg.T, "none")
    return _evolve(ops, u0, cfg, load, store=store)


def evolve_navier_stokes(ops: OperatorSet, u0, cfg: SchemeConfig, load=None, *, store=False, alarm=1e-6):
    """Navier-Stokes with semi-implicit skew convection (advecting velocity = previous step)."""
    if cfg.convection != "skew":
        cfg = SchemeConfig(cfg.theta, cfg.dt, cfg.T, "skew")
    return _evolve(ops, u0, cfg, load, store=store, alarm=alarm)


def skew_form(ops: OperatorSet, w, u, v):
    """b(w; u, v) on reduced fields."""
    return float(v @ (ops.convection(w) @ u))


def load_from_field(ops: OperatorSet, fx, ft=None):
    """Load callable t -> F for f(t, x) = ft(t) fx(x); fx callable or reduced coefficients."""
    from .stokes import rhs_vector
    F = rhs_vector(ops, fx)
    if ft is None:
        return lambda t: F
    return lambda t: ft(t) * F


# --------------------------------------------------------------------------
# measurements


def dyadic_times(T, dt):
    """T 2^{-k} for k = 0, 1, ... while >= dt (ascending)."""
    out = []
    t = T
    while t >= dt * (1 - 1e-12):
        out.append(t)
        t *= 0.5
    return np.array(out[::-1])


@dataclass
class SmoothingRecord:
    alpha: float
    sup_sqrt_t_Du: float
    sup_t_dudt: float
    times: np.ndarray


def measure_smoothing(trace: EvolutionTrace, u0_norm: float, times=None):
    """Suprema of sqrt(t) ||Du(t)|| / ||u0|| and t ||du/dt(t)|| / ||u0|| at dyadic times."""
    dt = trace.times[1] - trace.times[0]
    if times is None:
        times = dyadic_times(trace.times[-1], dt)
    idx = np.rint(np.asarray(times) / dt).astype(int)
    if np.any(np.abs(trace.times[idx] - times) > 1e-9 * dt) or np.any(idx < 1):
        raise ValueError("dyadic times must lie on the trace grid and be positive")
    t = trace.times[idx]
    a = np.sqrt(t) * trace.norm_Du[idx] / u0_norm
    b = t * trace.norm_dudt[idx] / u0_norm
    return SmoothingRecord(alpha=trace.alpha_max, sup_sqrt_t_Du=float(a.max()), sup_t_dudt=float(b.max()),
                           times=np.asarray(times))


def fit_decay(trace: EvolutionTrace, window=None):
    """Least-squares slope of -log ||u(t)|| on window (default [T/2, T])."""
    T = trace.times[-1]
    lo, hi = window if window is not None else (T / 2, T)
    sel = (trace.times >= lo - 1e-12) & (trace.times <= hi + 1e-12)
    norms = np.sqrt(2.0 * trace.kinetic)
    if np.any(norms[sel] <= 0) or sel.sum() < 2:
        raise ValueError("decay window holds no usable samples")
    if norms[sel][-1] > 0.5 * norms[sel][0]:
        warnings.warn("decay window too short: norm dropped by less than a factor 2", RuntimeWarning,
                      stacklevel=2)
    slope = np.polyfit(trace.times[sel], -np.log(norms[sel]), 1)[0]
    return float(slope)


def stokes_operator_norm(ops: OperatorSet, u):
    """||A_h u|| with A_h = P M^{-1} (K + B): the discrete Stokes operator."""
    w, _, _ = ops.projector().solve(ops.A @ u)
    return ops.l2(w)


def _mr_terms(ops, res: EvolutionResult, load, dt):
    du2 = au2 = f2 = 0.0
    prev = res.states[0]
    Mlu = None
    for n in range(1, len(res.states)):
        u = res.states[n]
        um = 0.5 * (u + prev)
        du2 += dt * ops.l2((u - prev) / dt) ** 2
        au2 += dt * stokes_operator_norm(ops, um) ** 2
        t0, t1 = (n - 1) * dt, n * dt
        Fm = 0.5 * (load(t0) + load(t1))
        if Mlu is None:
            from scipy.sparse.linalg import splu
            Mlu = splu(ops.M.tocsc())
        fm = Mlu.solve(Fm)
        f2 += dt * float(fm @ (ops.M @ fm))
        prev = u
    return du2, au2, f2


@dataclass
class MaxRegularityRecord:
    name: str
    ratio: float
    dudt2: float
    Au2: float
    f2: float


def maximal_regularity_ratio(ops: OperatorSet, family, cfg: SchemeConfig):
    """[int ||du/dt||^2 + int ||A_h u||^2] / int ||f||^2 per member, u0 = 0.

    family: list of (name, load) with load(t) a reduced load vector.  The
    L2 norm of f uses its M^{-1}-representative (the L2 projection onto the
    velocity space).
    """
    out = []
    for name, load in family:
        res = _evolve(ops, np.zeros(ops.n), SchemeConfig(0.5, cfg.dt, cfg.T, "none"), load, store=True)
        du2, au2, f2 = _mr_terms(ops, res, load, cfg.dt)
        ratio = (du2 + au2) / f2 if f2 > 0 else 0.0
        out.append(MaxRegularityRecord(name, ratio, du2, au2, f2))
    return out


def one_mode_ratio(mu, omega, T):
    """Closed-form ODE oracle for f = sin(omega t) phi, a' + mu a = f, a(0) = 0."""
    den = mu * mu + omega * omega

    def a(t):
        return (mu * math.sin(omega * t) - omega * math.cos(omega * t) + omega * math.exp(-mu * t)) / den

    def da(t):
        return math.sin(omega * t) - mu * a(t)

    opts = dict(limit=400, epsabs=0, epsrel=1e-12)
    num = quad(lambda t: da(t) ** 2, 0, T, **opts)[0] + mu * mu * quad(lambda t: a(t) ** 2, 0, T, **opts)[0]
    return num / quad(lambda t: math.sin(omega * t) ** 2, 0, T, **opts)[0]


def standard_family(ops: OperatorSet, eig, T):
    """Five forcing members: smooth, two time-oscillatory, boundary layer, and a mode mixture."""
    from .stokes import rhs_vector
    i = 0 if eig.mu[0] > 0 else 1
    mu1, phi1 = eig.mu[i], eig.phi[:, i]
    M = ops.M
    F1 = M @ phi1
    fam = [("steady_mode", lambda t: F1),
           ("sin_mu1", lambda t: math.sin(mu1 * t) * F1),
           ("sin_fast", lambda t: math.sin(40.0 * math.pi * t / T) * F1)]
    spec = ops.mesh.domain
    delta = 0.1 * spec.feature_size

    if spec.kind == "channel":
        def layer(x, y):
            g = np.exp(-y / delta) + np.exp(-(spec.H - y) / delta)
            return np.stack([g, np.zeros_like(g)], axis=-1)
    else:
        R = spec.R if spec.kind == "disk" else spec.R1

        def layer(x, y):
            r = np.hypot(x, y)
            g = np.exp(-(R - r) / delta)
            return np.stack([-y * g, x * g], axis=-1)
    FL = rhs_vector(ops, layer)
    fam.append(("boundary_layer", lambda t: FL))
    coef = np.random.default_rng(11).standard_normal(eig.k)
    FM = M @ (eig.phi @ coef)
    fam.append(("mode_mix_cos", lambda t: math.cos(3.0 * t) * FM))
    return fam
