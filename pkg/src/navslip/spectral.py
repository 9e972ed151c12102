"""Eigenpairs of the discrete slip-Stokes operator on discretely divergence-free fields."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh

from .discretization import OperatorSet, SlipCoefficient
from .errors import SolverError, SpanDeficiencyError
from .linalg import SaddleSystem

SHIFT = -1.0


@dataclass
class EigenDecomposition:
    mu: np.ndarray          # ascending
    phi: np.ndarray         # (n, k) reduced velocity coefficients, M-orthonormal
    ops: OperatorSet
    residuals: np.ndarray

    @property
    def k(self):
        return len(self.mu)

    def coefficients(self, u):
        return self.phi.T @ (self.ops.M @ u)

    def gram_error(self):
        G = self.phi.T @ (self.ops.M @ self.phi)
        return float(np.abs(G - np.eye(self.k)).max())


def _rayleigh_ritz(ops, V):
    """M-orthonormal Ritz pairs of A on span(V), ascending, with fixed signs."""
    A = V.T @ (ops.A @ V)
    Mv = V.T @ (ops.M @ V)
    mu, Y = sla.eigh(0.5 * (A + A.T), 0.5 * (Mv + Mv.T))
    phi = V @ Y
    # one more M-orthonormalization pass to push the Gram error to roundoff
    G = phi.T @ (ops.M @ phi)
    L = np.linalg.cholesky(0.5 * (G + G.T))
    phi = np.linalg.solve(L, phi.T).T
    idx = np.argmax(np.abs(phi), axis=0)
    sign = np.sign(phi[idx, np.arange(phi.shape[1])])
    sign[sign == 0] = 1.0
    return mu, phi * sign


def projected_residuals(ops: OperatorSet, mu, phi):
    """||P M^{-1}(A phi - mu M phi)||_M / max(mu, 1) per pair (divergence-free residual)."""
    sys = ops.projector()
    out = np.empty(len(mu))
    for i in range(len(mu)):
        r = ops.A @ phi[:, i] - mu[i] * (ops.M @ phi[:, i])
        if not np.any(r):
            out[i] = 0.0
            continue
        u, _, _ = sys.solve(r)
        out[i] = ops.l2(u) / max(abs(mu[i]), 1.0)
    return out


def eigensolve(ops: OperatorSet, k: int = 10, *, seed: int = 1234, tol: float = 1e-12,
               residual_tol: float = 1e-8) -> EigenDecomposition:
    """Lowest k eigenpairs by shift-invert Lanczos on the bordered saddle system."""
    if k > 50:
        raise ValueError("at most 50 eigenpairs")
    key = ("eig", k, seed)
    if key in ops._cache:
        return ops._cache[key]
    sysk = SaddleSystem(ops.A - SHIFT * ops.M, ops.D, ops.mean)
    n = ops.n

    def opinv(x):
        return sysk.solve(x)[0]

    OPinv = LinearOperator((n, n), matvec=opinv, dtype=float)
    v0 = opinv(ops.M @ np.random.default_rng(seed).standard_normal(n))
    ncv = min(n - 1, max(2 * k + 1, 20))
    try:
        vals, vecs = eigsh(ops.A, k=k, M=ops.M, sigma=SHIFT, OPinv=OPinv, which="LM", v0=v0,
                           ncv=ncv, tol=tol, maxiter=10000)
    except ArpackNoConvergence as exc:
        got = len(exc.eigenvalues)
        raise SolverError(f"eigensolver did not converge: index {got + 1} of {k} missing",
                          failed_index=got + 1) from exc
    mu, phi = _rayleigh_ritz(ops, vecs[:, np.argsort(vals)])
    mu = np.where(np.abs(mu) < 1e-12 * max(1.0, abs(mu[-1])), 0.0, mu)
    res = projected_residuals(ops, mu, phi)
    bad = np.nonzero(res > residual_tol)[0]
    if len(bad):
        raise SolverError(f"eigenpair {int(bad[0]) + 1} residual {res[bad[0]]:.2e} above {residual_tol:.0e}",
                          failed_index=int(bad[0]) + 1)
    eig = EigenDecomposition(mu=mu, phi=phi, ops=ops, residuals=res)
    ops._cache[key] = eig
    return eig


def dense_eigenvalues(ops: OperatorSet):
    """All eigenvalues on the divergence-free subspace via an explicit null-space basis."""
    Z = sla.null_space(ops.D.toarray())
    A = Z.T @ (ops.A @ Z)
    M = Z.T @ (ops.M @ Z)
    return sla.eigh(0.5 * (A + A.T), 0.5 * (M + M.T), eigvals_only=True)


# --------------------------------------------------------------------------
# functional calculus on the computed span


def _span_coefficients(eig, u, tol):
    c = eig.coefficients(u)
    rest = u - eig.phi @ c
    nu = eig.ops.l2(u)
    if nu > 0 and eig.ops.l2(rest) > tol * nu:
        raise SpanDeficiencyError(f"field leaves the eigenspan: relative defect {eig.ops.l2(rest) / nu:.2e}")
    return c


def fractional_apply(eig: EigenDecomposition, beta: float, u, tol=1e-6):
    """A^beta u for u in the span of the computed eigenpairs, beta in [-1, 1]."""
    if not -1.0 <= beta <= 1.0:
        raise ValueError("beta must lie in [-1, 1]")
    c = _span_coefficients(eig, u, tol)
    if beta < 0 and np.any((eig.mu == 0) & (c != 0)):
        raise SpanDeficiencyError("negative power of a zero eigenvalue")
    with np.errstate(divide="ignore"):
        w = np.where(eig.mu == 0, 1.0 if beta == 0 else 0.0, np.abs(eig.mu) ** beta)
    return eig.phi @ (w * c)


@dataclass
class HalfPowerResult:
    c1: float
    c2: float
    parseval_error: float
    ratios: np.ndarray


def halfpower_equivalence(eig: EigenDecomposition, samples=None, *, count=32, seed=7):
    """Extreme ratios of ||A^{1/2}u||^2 + ||u||^2 to ||u||_{H1}^2 over sample fields.

    Samples default to `count` seeded random combinations of the eigenpairs.
    """
    ops = eig.ops
    if samples is None:
        C = np.random.default_rng(seed).standard_normal((eig.k, count))
        samples = eig.phi @ C
    samples = np.asarray(samples).reshape(ops.n, -1)
    err, ratios = 0.0, []
    for j in range(samples.shape[1]):
        u = samples[:, j]
        h = fractional_apply(eig, 0.5, u)
        half = ops.l2(h) ** 2
        quad = float(u @ (ops.A @ u))
        err = max(err, abs(half - quad) / max(quad, 1e-300))
        ratios.append((half + ops.l2(u) ** 2) / ops.h1(u) ** 2)
    ratios = np.array(ratios)
    return HalfPowerResult(c1=float(ratios.min()), c2=float(ratios.max()), parseval_error=err, ratios=ratios)


def imaginary_power_norm(eig: EigenDecomposition, s: float):
    """Operator norm of A^{is} on the eigenspan in the L2 (M) norm."""
    if abs(s) > 10:
        raise ValueError("|s| must be at most 10")
    mu = eig.mu
    if np.any(mu <= 0):
        raise SpanDeficiencyError("imaginary powers need a positive spectrum")
    T = np.diag(np.exp(1j * s * np.log(mu)))
    G = eig.phi.T @ (eig.ops.M @ eig.phi)
    G = 0.5 * (G + G.T)
    vals = sla.eigh(T.conj().T @ G @ T, G, eigvals_only=True)
    return float(np.sqrt(vals.max()))


# --------------------------------------------------------------------------
# alpha table


EIG_COLUMNS = ("alpha", "index", "mu", "mu_dirichlet", "gap")


@dataclass
class EigAlphaTable:
    alphas: np.ndarray
    mu: np.ndarray            # (len(alphas), k)
    mu_dirichlet: np.ndarray  # (k,)

    def rows(self):
        out = []
        for a, row in zip(self.alphas, self.mu):
            for i, m in enumerate(row):
                out.append({"alpha": float(a), "index": i + 1, "mu": float(m),
                            "mu_dirichlet": float(self.mu_dirichlet[i]),
                            "gap": float(self.mu_dirichlet[i] - m)})
        return out

    def monotone(self, tol=1e-10):
        return bool(np.all(np.diff(self.mu, axis=0) >= -tol * np.maximum(1.0, np.abs(self.mu[1:]))))

    def gap_slopes(self):
        """Slope of log(mu_D - mu(alpha)) vs log alpha over the largest decade, per index."""
        a = self.alphas
        sel = a >= a.max() / 10.0 * (1 - 1e-12)
        out = []
        for i in range(self.mu.shape[1]):
            gap = self.mu_dirichlet[i] - self.mu[sel, i]
            if np.any(gap <= 0) or sel.sum() < 2:
                out.append(float("nan"))
                continue
            out.append(float(np.polyfit(np.log(a[sel]), np.log(gap), 1)[0]))
        return out


def eig_alpha_table(ops: OperatorSet, alphas, k=5, *, executor=None):
    """mu_i(alpha) over an ascending grid plus the no-slip row; `executor` may map over alpha."""
    alphas = np.asarray(sorted(alphas), float)
    pos = alphas[alphas > 0]
    if len(pos) < 2 or math.log10(pos.max() / pos.min()) < 4 - 1e-9:
        raise ValueError("alpha grid must span at least four decades")
    def one(a):
        return eigensolve(ops.with_alpha(SlipCoefficient.constant(a)), k).mu

    mu = np.array(list(executor.map(one, alphas)) if executor is not None else [one(a) for a in alphas])
    mud = eigensolve(ops.dirichlet(), k).mu
    return EigAlphaTable(alphas=alphas, mu=mu, mu_dirichlet=mud)
