"""Steady, resolvent and Dirichlet-twin solves of the slip-Stokes system."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.linalg import LinearOperator, eigsh, splu

from .discretization import OperatorSet
from .errors import SingularOperatorError, SolverError
from .linalg import SaddleSystem

RAYS = (0.0, math.pi / 4, math.pi / 2)


@dataclass
class ResolventSample:
    lam: complex
    norm_u: float
    norm_Du: float
    norm_pi: float
    residual: float
    alpha_min: float
    alpha_max: float
    norm_f: float = float("nan")
    opnorm_u: float = float("nan")
    opnorm_Du: float = float("nan")

    @property
    def ray_arg(self):
        return float(np.angle(self.lam))

    @property
    def lambda_abs(self):
        return float(abs(self.lam))


@dataclass
class SteadySolution:
    u: np.ndarray
    p: np.ndarray
    residual: float
    divergence: float
    kernel_component: np.ndarray = field(default_factory=lambda: np.zeros(0))


def rhs_vector(ops: OperatorSet, f):
    """Reduced load for f: callable (x, y) -> (..., 2), reduced coefficients, or None."""
    if f is None:
        return np.zeros(ops.n)
    if callable(f):
        return ops.load(f)
    f = np.asarray(f)
    if f.shape != (ops.n,):
        raise ValueError(f"data of length {f.shape} does not match {ops.n} velocity dofs")
    return ops.M @ f


def data_norm(ops: OperatorSet, f):
    if f is None:
        return 0.0
    if callable(f):
        q = ops.space.quadrature(6)
        v = np.asarray(f(q.points[..., 0], q.points[..., 1]))
        return float(np.sqrt(np.sum(q.weights * np.sum(np.abs(v) ** 2, axis=-1))))
    return ops.l2(np.asarray(f))


def _divergence(ops, u):
    Du = ops.D @ u
    scale = np.sqrt(ops.D.multiply(ops.D).sum()) * max(ops.l2(u), 1e-300)
    return float(np.linalg.norm(Du) / scale) if scale > 0 else 0.0


def solve_steady(ops: OperatorSet, f=None, g=None, *, filter_kernel=True) -> SteadySolution:
    """lambda = 0 solve.  g: tangential slip data at the boundary frame points.

    With alpha = 0 on a geometry with a zero-deformation tangential field the
    operator is singular; that field is projected out of data and solution
    (``kernel_component`` holds the removed data coefficient) or, with
    ``filter_kernel=False``, a SingularOperatorError is raised.
    """
    F = rhs_vector(ops, f)
    if g is not None:
        F = F + ops.boundary_load(np.asarray(g))
    modes = ops.kernel_modes()
    if modes.shape[1] and not filter_kernel:
        raise SingularOperatorError("alpha vanishes and a rigid motion spans the kernel of the operator")
    sys = SaddleSystem(ops.A, ops.D, ops.mean, modes=modes if modes.shape[1] else None, M=ops.M)
    u, p, extras = sys.solve(F)
    return SteadySolution(u=u, p=p, residual=sys.last_residual, divergence=_divergence(ops, u),
                          kernel_component=np.asarray(extras[1:]))


def resolvent_system(ops: OperatorSet, lam):
    key = ("resolvent", complex(lam))
    if key not in ops._cache:
        A = ops.A + lam * ops.M if lam != 0 else ops.A
        ops._cache[key] = SaddleSystem(A, ops.D, ops.mean)
    return ops._cache[key]


def solve_resolvent(ops: OperatorSet, lam, f=None, g=None):
    """(lam M + A) u + D^T pi = F with Re lam >= 0; returns (u, pi, ResolventSample)."""
    lam = complex(lam)
    if lam.real < 0:
        raise ValueError("resolvent parameter must have nonnegative real part")
    if lam == 0:
        sol = solve_steady(ops, f, g)
        u, p, res = sol.u, sol.p, sol.residual
    else:
        F = rhs_vector(ops, f)
        if g is not None:
            F = F + ops.boundary_load(np.asarray(g))
        if lam.imag == 0:
            lam_r = lam.real
            sys = resolvent_system(ops, lam_r)
        else:
            sys = resolvent_system(ops, lam)
        try:
            u, p, _ = sys.solve(F)
        except SolverError as exc:
            exc.diagnostics["lam"] = lam
            raise
        res = sys.last_residual
    amin, amax = float(ops.alpha_values.min(initial=0.0)), float(ops.alpha_values.max(initial=0.0))
    sample = ResolventSample(lam=lam, norm_u=ops.l2(u), norm_Du=ops.dnorm(u), norm_pi=ops.pnorm(p),
                             residual=res, alpha_min=amin, alpha_max=amax, norm_f=data_norm(ops, f))
    return u, p, sample


def solve_dirichlet(ops: OperatorSet, lam=0.0, f=None):
    """Companion no-slip solve on the same mesh; returns reduced (u, pi) of the Dirichlet space.

    f is a callable, None, or reduced coefficients of `ops` (slip space).
    """
    dops = ops.dirichlet() if ops.kind == "slip" else ops
    if f is None or callable(f):
        F = rhs_vector(dops, f)
    else:
        F = dops.cspace.restrict(ops.Mfull @ ops.full(np.asarray(f)))
    lam = complex(lam)
    sys = resolvent_system(dops, lam.real if lam.imag == 0 else lam)
    u, p, _ = sys.solve(F)
    return u, p


def dirichlet_to_slip(ops: OperatorSet, u_dir):
    """Express a Dirichlet-space field in the slip space's reduced coefficients (exact embedding)."""
    dops = ops.dirichlet()
    return ops.cspace.project_nodal(dops.full(u_dir))


# --------------------------------------------------------------------------
# resolvent operator norms


def resolvent_operator_norms(ops: OperatorSet, lam, *, tol=1e-3, seed=0):
    """(sup ||u||/||f||, sup ||Du||/||f||) over discrete data f for u = (lam + A)^{-1} P f.

    The first is 1 / |lam + mu_1| (A is self-adjoint, Re lam >= 0); the second
    is the top eigenvalue of M X(conj lam) (K/2) X(lam) M against M, found by
    Lanczos with two saddle solves per product.
    """
    lam = complex(lam)
    sysl = resolvent_system(ops, lam.real if lam.imag == 0 else lam)
    sysc = resolvent_system(ops, lam.real if lam.imag == 0 else lam.conjugate())
    M, K = ops.M, ops.K
    cplx = lam.imag != 0
    dtype = complex if cplx else float

    def mv(x):
        u = sysl.solve(M @ x)[0]
        w = sysc.solve(0.5 * (K @ u))[0]
        return M @ w

    if "Mlu" not in ops._cache:
        ops._cache["Mlu"] = splu(ops.M.tocsc())
    Mlu = ops._cache["Mlu"]

    def minv(x):
        if np.iscomplexobj(x):
            return Mlu.solve(x.real) + 1j * Mlu.solve(x.imag)
        return Mlu.solve(x)

    n = ops.n
    H = LinearOperator((n, n), matvec=mv, dtype=dtype)
    Mi = LinearOperator((n, n), matvec=minv, dtype=dtype)
    v0 = np.random.default_rng(seed).standard_normal(n).astype(dtype)
    nu = eigsh(H, k=1, M=ops.M.astype(dtype), Minv=Mi, which="LA", v0=v0, tol=tol,
               ncv=min(n - 1, 40), maxiter=5000, return_eigenvectors=False)
    mu1 = smallest_eigenvalue(ops)
    return 1.0 / abs(lam + mu1), float(np.sqrt(max(np.real(nu[0]), 0.0)))


def smallest_eigenvalue(ops: OperatorSet):
    if "mu1" not in ops._cache:
        from .spectral import eigensolve
        ops._cache["mu1"] = float(eigensolve(ops, 1).mu[0])
    return ops._cache["mu1"]


# --------------------------------------------------------------------------
# scans


@dataclass
class ScanResult:
    samples: list
    slopes_u: dict
    slopes_Du: dict
    op_slopes_u: dict
    op_slopes_Du: dict
    constant: float
    op_constant: float

    def rows(self):
        return [sample_row(s) for s in self.samples]


SCAN_COLUMNS = ("alpha_min", "alpha_max", "ray_arg", "lambda_abs", "norm_u", "norm_Du", "norm_pi",
                "residual", "norm_f", "opnorm_u", "opnorm_Du")


def sample_row(s: ResolventSample):
    return {"alpha_min": s.alpha_min, "alpha_max": s.alpha_max, "ray_arg": s.ray_arg,
            "lambda_abs": s.lambda_abs, "norm_u": s.norm_u, "norm_Du": s.norm_Du, "norm_pi": s.norm_pi,
            "residual": s.residual, "norm_f": s.norm_f, "opnorm_u": s.opnorm_u, "opnorm_Du": s.opnorm_Du}


def loglog_slope(x, y):
    x, y = np.log(np.asarray(x, float)), np.log(np.asarray(y, float))
    A = np.column_stack([x, np.ones_like(x)])
    return float(np.linalg.lstsq(A, y, rcond=None)[0][0])


def resolvent_scan(ops: OperatorSet, f, rays=RAYS, magnitudes=None, *, operator_norms=True):
    """Samples over rays x magnitudes; slopes per ray for fixed f and for the operator norms."""
    if magnitudes is None:
        magnitudes = np.geomspace(10.0, 1e4, 7)
    magnitudes = np.asarray(magnitudes, float)
    if magnitudes.max() / magnitudes.min() < 999.0:
        raise ValueError("magnitudes must span at least three decades")
    samples = []
    slopes_u, slopes_Du, op_u, op_Du = {}, {}, {}, {}
    for arg in rays:
        ray = []
        for r in magnitudes:
            lam = r * complex(math.cos(arg), math.sin(arg))
            if abs(lam.imag) < 1e-14 * r:
                lam = complex(r, 0.0)
            _, _, s = solve_resolvent(ops, lam, f)
            if operator_norms:
                s.opnorm_u, s.opnorm_Du = resolvent_operator_norms(ops, lam)
            ray.append(s)
            _drop_resolvent(ops, lam)
        samples.extend(ray)
        slopes_u[arg] = loglog_slope(magnitudes, [s.norm_u for s in ray])
        slopes_Du[arg] = loglog_slope(magnitudes, [s.norm_Du for s in ray])
        if operator_norms:
            op_u[arg] = loglog_slope(magnitudes, [s.opnorm_u for s in ray])
            op_Du[arg] = loglog_slope(magnitudes, [s.opnorm_Du for s in ray])
    const = max(s.lambda_abs * s.norm_u / s.norm_f for s in samples) if samples[0].norm_f > 0 else 0.0
    op_const = max(s.lambda_abs * s.opnorm_u for s in samples) if operator_norms else float("nan")
    return ScanResult(samples, slopes_u, slopes_Du, op_u, op_Du, const, op_const)


def _drop_resolvent(ops, lam):
    for key in [k for k in ops._cache if isinstance(k, tuple) and k[0] == "resolvent"]:
        del ops._cache[key]


# --------------------------------------------------------------------------
# manufactured convergence


@dataclass
class ConvergenceRecord:
    h: float
    err_u: float
    err_h1: float
    err_p: float
    residual: float


def manufactured_errors(ops: OperatorSet, case, degree=8):
    """Solve with the case's forcing and slip data; return (u, p, ConvergenceRecord)."""
    g = case.slip_data(ops.frame, ops.alpha_values)
    if case.lam == 0:
        sol = solve_steady(ops, case.forcing, g)
        u, p, res = sol.u, sol.p, sol.residual
    else:
        u, p, s = solve_resolvent(ops, case.lam, case.forcing, g)
        res = s.residual
    space = ops.space
    q = space.quadrature(degree)
    x, y = q.points[..., 0], q.points[..., 1]
    uh, Gh = space.evaluate(ops.full(u), q)
    ue = case.velocity.value(x, y)
    Ge = case.velocity.jacobian(x, y)
    W = q.weights
    eu = np.sqrt(np.sum(W * np.sum(np.abs(uh - ue) ** 2, axis=-1)))
    eg = np.sqrt(np.sum(W * np.sum(np.abs(Gh - Ge) ** 2, axis=(-1, -2))))
    pe = case.pressure.value(x, y)
    ph = space.evaluate_pressure(p, q)
    area = W.sum()
    d = (ph - np.sum(W * ph) / area) - (pe - np.sum(W * pe) / area)
    ep = np.sqrt(np.sum(W * np.abs(d) ** 2))
    rec = ConvergenceRecord(h=ops.mesh.h, err_u=float(eu), err_h1=float(np.sqrt(eu ** 2 + eg ** 2)),
                            err_p=float(ep), residual=res)
    return u, p, rec


def convergence_orders(records):
    """Observed orders between consecutive records (h decreasing)."""
    out = []
    for a, b in zip(records[:-1], records[1:]):
        r = math.log(a.h / b.h)
        out.append({"u": math.log(a.err_u / b.err_u) / r, "h1": math.log(a.err_h1 / b.err_h1) / r,
                    "p": math.log(a.err_p / b.err_p) / r})
    return out
