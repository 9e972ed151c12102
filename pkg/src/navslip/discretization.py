"""Taylor-Hood (P2/P1) discretization of the slip-Stokes forms.

The velocity space enforces u.n = 0 strongly: every boundary node keeps only
its tangential coefficient, through a sparse change of basis ``Q`` mapping
reduced coefficients to the full nodal vector (interleaved x/y components).
All operators in an :class:`OperatorSet` act on the reduced coefficients:

    M   velocity mass                    K   2 (D u, D v)
    B   (alpha u.tau, v.tau) on Gamma    D   -(q, div v), pressure rows
    Mp  pressure mass                    H1  full H^1 Gram (mass + grad:grad)

Cells owning a curved boundary edge are isoparametric (the edge midpoint
sits on the chart); boundary integrals always use the analytic chart.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np
import scipy.sparse as sps

from . import kernels
from .errors import InconsistentChartError, NegativeSlipError
from .geometry import BoundaryFrame, CircleChart, Mesh, boundary_frame
from .linalg import Pattern, SaddleSystem, symmetrize
from .quadrature import triangle_rule

INTERIOR_DEGREE = 4
BOUNDARY_DEGREE = 6

# reference P2 nodes: vertices, then midpoints of edges (0,1), (1,2), (2,0)
_EDGE_LOCAL = np.array([[0, 1], [1, 2], [2, 0]])


def p2_basis(pts):
    """Values (nq, 6) and reference gradients (nq, 6, 2) of the P2 basis."""
    xi, eta = pts[:, 0], pts[:, 1]
    l0, l1, l2 = 1.0 - xi - eta, xi, eta
    N = np.column_stack([l0 * (2 * l0 - 1), l1 * (2 * l1 - 1), l2 * (2 * l2 - 1),
                         4 * l0 * l1, 4 * l1 * l2, 4 * l2 * l0])
    dl = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
    lam = [l0, l1, l2]
    dN = np.empty((len(xi), 6, 2))
    for i in range(3):
        dN[:, i] = (4 * lam[i] - 1)[:, None] * dl[i]
    for e, (i, j) in enumerate(_EDGE_LOCAL):
        dN[:, 3 + e] = 4 * (lam[i][:, None] * dl[j] + lam[j][:, None] * dl[i])
    return N, dN


def p1_basis(pts):
    xi, eta = pts[:, 0], pts[:, 1]
    return np.column_stack([1.0 - xi - eta, xi, eta])


def edge_reference_points(local_edge, t):
    """Reference coordinates of parameter t in [0, 1] along local edge e."""
    t = np.asarray(t, dtype=float)
    e = np.asarray(local_edge)
    xi = np.where(e == 0, t, np.where(e == 1, 1.0 - t, 0.0))
    eta = np.where(e == 0, 0.0, np.where(e == 1, t, 1.0 - t))
    return np.column_stack([xi, eta])


@dataclass
class CellQuadrature:
    points: np.ndarray      # (nc, nq, 2) physical
    weights: np.ndarray     # (nc, nq)
    phi: np.ndarray         # (nq, 6)
    grad: np.ndarray        # (nc, nq, 6, 2)
    pbasis: np.ndarray      # (nq, 3)
    ref: np.ndarray         # (nq, 2)


class FunctionSpace:
    """P2 velocity / P1 pressure on a mesh, before the normal constraint."""

    def __init__(self, mesh: Mesh, isoparametric: bool = True):
        self.mesh = mesh
        self.isoparametric = isoparametric
        cells = mesh.cells
        nc = len(cells)
        vm = np.unique(mesh.master)
        vid = np.full(mesh.n_vertices, -1, dtype=np.int64)
        vid[vm] = np.arange(len(vm))
        cvert = vid[mesh.master[cells]]
        self.n_vertex_nodes = len(vm)
        keys = np.sort(np.stack([cvert[:, _EDGE_LOCAL[:, 0]], cvert[:, _EDGE_LOCAL[:, 1]]], axis=-1), axis=-1)
        uniq, inv = np.unique(keys.reshape(-1, 2), axis=0, return_inverse=True)
        self.n_edge_nodes = len(uniq)
        self.cell_nodes = np.hstack([cvert, self.n_vertex_nodes + inv.reshape(nc, 3)])
        self.cell_pnodes = cvert
        self.n_nodes = self.n_vertex_nodes + self.n_edge_nodes
        self.n_pressure = self.n_vertex_nodes

        X = mesh.vertices[cells]
        mids = 0.5 * (X[:, _EDGE_LOCAL[:, 0]] + X[:, _EDGE_LOCAL[:, 1]])
        smid = 0.5 * (mesh.bedge_s0 + mesh.bedge_s1)
        if isoparametric:
            for k in range(mesh.n_boundary_edges):
                ch = mesh.charts[mesh.bedge_chart[k]]
                if isinstance(ch, CircleChart):
                    mids[mesh.bedge_cell[k], mesh.bedge_local[k]] = ch.point(smid[k])
        self.geom = np.ascontiguousarray(np.concatenate([X, mids], axis=1))
        self.node_coords = np.empty((self.n_nodes, 2))
        self.node_coords[self.cell_nodes.ravel()] = self.geom.reshape(-1, 2)

        # boundary nodes with the analytic frame at each of them
        bc, bl = mesh.bedge_cell, mesh.bedge_local
        na = self.cell_nodes[bc, bl]
        nb = self.cell_nodes[bc, (bl + 1) % 3]
        nm = self.cell_nodes[bc, 3 + bl]
        nodes = np.concatenate([na, nm, nb])
        svals = np.concatenate([mesh.bedge_s0, smid, mesh.bedge_s1])
        chart = np.tile(mesh.bedge_chart, 3)
        normal = np.empty((len(nodes), 2))
        for ci, ch in enumerate(mesh.charts):
            sel = chart == ci
            normal[sel] = ch.normal(svals[sel])
        bnodes, first = np.unique(nodes, return_index=True)
        bn = normal[first]
        # a node shared by two edges must see one normal
        check = np.zeros((self.n_nodes, 2))
        check[nodes] = normal
        if np.abs(check[nodes] - normal).max() > 1e-12:
            raise InconsistentChartError("boundary node normals disagree between edges")
        self.boundary_nodes = bnodes
        self.boundary_normals = bn
        self.boundary_tangents = np.column_stack([-bn[:, 1], bn[:, 0]])
        self.boundary_chart = chart[first]
        self._quad = {}
        self.cell_dofs = np.empty((nc, 12), dtype=np.int64)
        self.cell_dofs[:, 0::2] = 2 * self.cell_nodes
        self.cell_dofs[:, 1::2] = 2 * self.cell_nodes + 1

    @property
    def n_full(self):
        return 2 * self.n_nodes

    def quadrature(self, degree=INTERIOR_DEGREE) -> CellQuadrature:
        if degree not in self._quad:
            ref, w = triangle_rule(degree)
            N, dN = p2_basis(ref)
            J = np.einsum("cai,qaj->cqij", self.geom, dN)
            det = J[..., 0, 0] * J[..., 1, 1] - J[..., 0, 1] * J[..., 1, 0]
            if np.any(det <= 0):
                raise InconsistentChartError("inverted isoparametric cell")
            inv = np.empty_like(J)
            inv[..., 0, 0] = J[..., 1, 1] / det
            inv[..., 1, 1] = J[..., 0, 0] / det
            inv[..., 0, 1] = -J[..., 0, 1] / det
            inv[..., 1, 0] = -J[..., 1, 0] / det
            G = np.einsum("cqji,qaj->cqai", inv, dN)
            pts = np.einsum("qa,cai->cqi", N, self.geom)
            self._quad[degree] = CellQuadrature(
                points=pts, weights=np.ascontiguousarray(w[None, :] * det),
                phi=np.ascontiguousarray(N), grad=np.ascontiguousarray(G),
                pbasis=np.ascontiguousarray(p1_basis(ref)), ref=ref)
        return self._quad[degree]

    def boundary_basis(self, frame: BoundaryFrame):
        """(cell index, P2 basis values (nq, 6), physical position on the cell edge)."""
        mesh = self.mesh
        cell = mesh.bedge_cell[frame.edge]
        ref = edge_reference_points(mesh.bedge_local[frame.edge], frame.t)
        N, _ = p2_basis(ref)
        pos = np.einsum("qa,qai->qi", N, self.geom[cell])
        return cell, N, pos

    # -- fields ------------------------------------------------------------

    def interpolate(self, fn):
        """Full nodal vector (2 * n_nodes,) of a vector field callable."""
        vals = np.asarray(fn(self.node_coords[:, 0], self.node_coords[:, 1]))
        return vals.reshape(-1)

    def interpolate_scalar(self, fn):
        """P1 pressure coefficients of a scalar callable."""
        xy = self.node_coords[:self.n_vertex_nodes]
        return np.asarray(fn(xy[:, 0], xy[:, 1]), dtype=float).copy()

    def evaluate(self, ufull, quad: CellQuadrature):
        """Values (nc, nq, 2) and gradients (nc, nq, 2, 2) [i, j] = d u_i / d x_j."""
        U = np.asarray(ufull).reshape(-1, 2)[self.cell_nodes]   # (nc, 6, 2)
        val = np.einsum("qa,cai->cqi", quad.phi, U)
        grad = np.einsum("cqaj,cai->cqij", quad.grad, U)
        return val, grad

    def evaluate_pressure(self, p, quad: CellQuadrature):
        return np.einsum("qk,ck->cq", quad.pbasis, np.asarray(p)[self.cell_pnodes])

    # -- full (unconstrained) operators ------------------------------------

    @cached_property
    def vector_pattern(self):
        d = self.cell_dofs
        return Pattern(np.repeat(d, 12, axis=1), np.tile(d, (1, 12)), (self.n_full, self.n_full))

    @cached_property
    def div_pattern(self):
        rows = np.repeat(self.cell_pnodes, 12, axis=1)
        cols = np.tile(self.cell_dofs, (1, 3))
        return Pattern(rows, cols, (self.n_pressure, self.n_full))

    @cached_property
    def pressure_pattern(self):
        p = self.cell_pnodes
        return Pattern(np.repeat(p, 3, axis=1), np.tile(p, (1, 3)), (self.n_pressure, self.n_pressure))

    @cached_property
    def full_operators(self):
        q = self.quadrature(INTERIOR_DEGREE)
        mass = kernels.local_mass(q.phi, q.weights)
        gg = kernels.local_gradgrad(q.grad, q.weights)
        lm = np.zeros((len(mass), 12, 12))
        lm[:, 0::2, 0::2] = mass
        lm[:, 1::2, 1::2] = mass
        lg = np.zeros_like(lm)
        lg[:, 0::2, 0::2] = gg
        lg[:, 1::2, 1::2] = gg
        ks = kernels.local_symgrad(q.grad, q.weights)
        ld = kernels.local_div(q.grad, q.pbasis, q.weights)
        P = q.pbasis
        lp = np.einsum("nq,qk,ql->nkl", q.weights, P, P)
        vp = self.vector_pattern
        return {
            "M": symmetrize(vp.matrix(lm)),
            "Grad": symmetrize(vp.matrix(lg)),
            "K": symmetrize(vp.matrix(ks)),
            "D": self.div_pattern.matrix(ld),
            "Mp": symmetrize(self.pressure_pattern.matrix(lp)),
        }

    def convection_matrix(self, wfull, degree=5):
        """Full skew convection matrix for advecting velocity w (full nodal vector)."""
        q = self.quadrature(degree)
        wq, _ = self.evaluate(wfull, q)
        lc = kernels.local_convection(q.phi, q.grad, q.weights, np.ascontiguousarray(wq))
        return self.vector_pattern.matrix(lc)

    def boundary_mass(self, frame: BoundaryFrame, alpha_values):
        """Full matrix of (alpha u.tau, v.tau) on the analytic boundary."""
        cell, N, _ = self.boundary_basis(frame)
        tau = frame.tangent
        vals = (frame.weight * alpha_values)
        loc = np.einsum("qa,qi->qai", N, tau).reshape(len(N), 12)
        contrib = vals[:, None, None] * loc[:, :, None] * loc[:, None, :]
        d = self.cell_dofs[cell]
        pat = Pattern(np.repeat(d, 12, axis=1), np.tile(d, (1, 12)), (self.n_full, self.n_full))
        return symmetrize(pat.matrix(contrib))


# --------------------------------------------------------------------------
# constrained space


class ConstrainedSpace:
    """Velocity space with u.n = 0 (``kind='slip'``) or u = 0 (``'dirichlet'``) at boundary nodes."""

    def __init__(self, space: FunctionSpace, kind: str = "slip"):
        if kind not in ("slip", "dirichlet"):
            raise ValueError(kind)
        self.space = space
        self.kind = kind
        nn = space.n_nodes
        is_b = np.zeros(nn, dtype=bool)
        is_b[space.boundary_nodes] = True
        tang = np.zeros((nn, 2))
        tang[space.boundary_nodes] = space.boundary_tangents
        ncols = np.where(is_b, 1 if kind == "slip" else 0, 2)
        start = np.concatenate([[0], np.cumsum(ncols)[:-1]])
        rows, cols, vals = [], [], []
        inner = np.nonzero(~is_b)[0]
        for c in range(2):
            rows.append(2 * inner + c)
            cols.append(start[inner] + c)
            vals.append(np.ones(len(inner)))
        if kind == "slip":
            bn = space.boundary_nodes
            for c in range(2):
                rows.append(2 * bn + c)
                cols.append(start[bn])
                vals.append(tang[bn, c])
        self.n = int(ncols.sum())
        self.Q = sps.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                                shape=(space.n_full, self.n))
        self.node_of_dof = np.repeat(np.arange(nn), ncols)
        self.is_boundary_dof = is_b[self.node_of_dof]

    def reconstruct(self, u):
        return self.Q @ u

    def restrict(self, F):
        return self.Q.T @ F

    def interpolate(self, fn):
        """Reduced coefficients of a field; the normal part at boundary nodes is dropped."""
        full = self.space.interpolate(fn)
        return self.project_nodal(full)

    def project_nodal(self, full):
        """Nodal (not L2) restriction: keeps interior values and tangential boundary components."""
        Qd = self.Q
        # columns of Q are orthonormal in the nodal Euclidean product
        return Qd.T @ full


def enforce_normal_constraint(space: FunctionSpace, kind: str = "slip") -> ConstrainedSpace:
    return ConstrainedSpace(space, kind)


# --------------------------------------------------------------------------
# slip coefficient


@dataclass
class SlipCoefficient:
    """Nonnegative slip coefficient on Gamma.

    kind ``constant`` uses `value`; ``piecewise`` uses `pieces`, a list of
    (chart_id, s_start, s_end, value) arcs (arclength, wrapping allowed) with
    `value` as the default elsewhere; ``samples`` uses `sampler(position,
    chart_id, s) -> array`, evaluated pointwise at boundary quadrature points.
    """

    kind: str = "constant"
    value: float = 1.0
    pieces: tuple = ()
    sampler: object = None

    def __post_init__(self):
        if self.kind not in ("constant", "piecewise", "samples"):
            raise ValueError(self.kind)
        if self.value < 0 or any(p[3] < 0 for p in self.pieces):
            raise NegativeSlipError("slip coefficient must be nonnegative")

    @classmethod
    def constant(cls, value):
        return cls("constant", float(value))

    def evaluate(self, mesh: Mesh, frame: BoundaryFrame):
        if self.kind == "constant":
            vals = np.full(len(frame), float(self.value))
        elif self.kind == "piecewise":
            vals = np.full(len(frame), float(self.value))
            ids = np.array([mesh.charts[c].chart_id for c in frame.chart])
            for chart_id, s0, s1, v in self.pieces:
                sel = ids == chart_id
                if not np.any(sel):
                    continue
                period = mesh.charts[frame.chart[np.argmax(sel)]].period
                s = np.mod(frame.s[sel] - s0, period)
                inside = s < np.mod(s1 - s0, period) if s1 - s0 < period else np.ones_like(s, bool)
                part = vals[sel]
                part[inside] = v
                vals[sel] = part
        else:
            ids = np.array([mesh.charts[c].chart_id for c in frame.chart])
            vals = np.asarray(self.sampler(frame.position, ids, frame.s), dtype=float)
        if np.any(vals < 0) or not np.all(np.isfinite(vals)):
            raise NegativeSlipError("slip coefficient sampled negative or non-finite")
        return vals

    def positive_length(self, mesh, frame):
        """|Gamma_0|: arclength where alpha > 0."""
        return float(frame.weight[self.evaluate(mesh, frame) > 0].sum())

    def summary(self, mesh, frame):
        v = self.evaluate(mesh, frame)
        return float(v.min()), float(v.max())

    def scaled(self, c):
        return replace(self, value=self.value * c,
                       pieces=tuple((a, b, d, v * c) for a, b, d, v in self.pieces),
                       sampler=None if self.sampler is None else
                       (lambda *args, _s=self.sampler: c * np.asarray(_s(*args))))


# --------------------------------------------------------------------------
# operator set


@dataclass
class OperatorSet:
    mesh: Mesh
    frame: BoundaryFrame
    space: FunctionSpace
    cspace: ConstrainedSpace
    alpha: SlipCoefficient | None
    alpha_values: np.ndarray
    M: sps.csr_matrix
    K: sps.csr_matrix
    B: sps.csr_matrix
    D: sps.csr_matrix
    Mp: sps.csr_matrix
    H1: sps.csr_matrix
    Bfull: sps.csr_matrix = field(repr=False, default=None)
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def kind(self):
        return self.cspace.kind

    @property
    def n(self):
        return self.cspace.n

    @property
    def A(self):
        if "A" not in self._cache:
            self._cache["A"] = (self.K + self.B).tocsr()
        return self._cache["A"]

    @property
    def mean(self):
        """Pressure mean functional: mean . p = integral of p."""
        if "mean" not in self._cache:
            self._cache["mean"] = np.asarray(self.Mp.sum(axis=1)).ravel()
        return self._cache["mean"]

    @property
    def area(self):
        return float(self.mean.sum())

    # norms --------------------------------------------------------------

    def l2(self, u):
        return float(np.sqrt(max(np.real(np.vdot(u, self.M @ u)), 0.0)))

    def dnorm(self, u):
        """||D u||_{L2}; u^T K u = 2 ||D u||^2."""
        return float(np.sqrt(max(np.real(np.vdot(u, self.K @ u)), 0.0) / 2.0))

    def friction(self, u):
        return float(max(np.real(np.vdot(u, self.B @ u)), 0.0))

    def h1(self, u):
        return float(np.sqrt(max(np.real(np.vdot(u, self.H1 @ u)), 0.0)))

    def pnorm(self, p):
        return float(np.sqrt(max(np.real(np.vdot(p, self.Mp @ p)), 0.0)))

    def zero_mean(self, p):
        return p - (self.mean @ p) / self.area

    # data ---------------------------------------------------------------

    def load(self, f, degree=6):
        """Reduced load vector: f callable (x, y) -> (..., 2) or full nodal vector."""
        if callable(f):
            q = self.space.quadrature(degree)
            fv = np.asarray(f(q.points[..., 0], q.points[..., 1]))
            loc = np.einsum("cq,cqi,qa->cai", q.weights, fv, q.phi).reshape(len(fv), 12)
            full = np.zeros(self.space.n_full, dtype=loc.dtype)
            np.add.at(full, self.space.cell_dofs.ravel(), loc.ravel())
            return self.cspace.restrict(full)
        return self.cspace.restrict(self.Mfull @ np.asarray(f))

    def boundary_load(self, g_values):
        """Reduced vector of (g, v.tau) on Gamma for tangential data g at frame points."""
        cell, N, _ = self.space.boundary_basis(self.frame)
        loc = np.einsum("q,qa,qi->qai", self.frame.weight * g_values, N, self.frame.tangent).reshape(len(N), 12)
        full = np.zeros(self.space.n_full, dtype=loc.dtype)
        np.add.at(full, self.space.cell_dofs[cell].ravel(), loc.ravel())
        return self.cspace.restrict(full)

    def interpolate(self, fn):
        return self.cspace.interpolate(fn)

    def full(self, u):
        return self.cspace.reconstruct(u)

    @property
    def Mfull(self):
        return self.space.full_operators["M"]

    # derived operators --------------------------------------------------

    def rigid_modes(self, tol=1e-9):
        """Reduced zero-deformation fields admissible on this geometry (maybe empty)."""
        kind = self.mesh.domain.kind
        if self.kind == "dirichlet":
            return np.zeros((self.n, 0))
        if kind in ("disk", "annulus"):
            r = self.interpolate(lambda x, y: np.stack([-y, x], axis=-1))
        else:
            r = self.interpolate(lambda x, y: np.stack([np.ones_like(x), np.zeros_like(y)], axis=-1))
        if abs(r @ (self.K @ r)) > tol * (r @ (self.H1 @ r)):
            return np.zeros((self.n, 0))
        scale = self.l2(r)
        return (r / scale).reshape(-1, 1)

    def kernel_modes(self):
        """Modes spanning the kernel of A on the divergence-free space (alpha = 0 case)."""
        R = self.rigid_modes()
        if R.shape[1] and self.friction(R[:, 0]) > 1e-12 * self.l2(R[:, 0]) ** 2:
            return np.zeros((self.n, 0))
        return R

    def projector(self):
        """Cached saddle system for the discrete Leray projection."""
        if "P" not in self._cache:
            self._cache["P"] = SaddleSystem(self.M, self.D, self.mean)
        return self._cache["P"]

    def with_alpha(self, alpha: SlipCoefficient):
        return _restricted(self.mesh, self.frame, self.space, self.cspace, alpha)

    def dirichlet(self):
        if "dirichlet" not in self._cache:
            self._cache["dirichlet"] = _restricted(self.mesh, self.frame, self.space,
                                                   ConstrainedSpace(self.space, "dirichlet"), None)
        return self._cache["dirichlet"]

    def convection(self, w_reduced):
        """Reduced skew convection matrix for advecting velocity w."""
        C = self.space.convection_matrix(self.full(np.real(w_reduced)))
        Cr = (self.cspace.Q.T @ C @ self.cspace.Q).tocsr()
        return ((Cr - Cr.T) * 0.5).tocsr()


def _restricted(mesh, frame, space, cspace, alpha):
    ops = space.full_operators
    Q = cspace.Q
    QT = Q.T.tocsr()
    if alpha is None:
        avals = np.zeros(len(frame))
    else:
        avals = alpha.evaluate(mesh, frame)
    Bfull = space.boundary_mass(frame, avals)
    M = symmetrize(QT @ ops["M"] @ Q)
    return OperatorSet(
        mesh=mesh, frame=frame, space=space, cspace=cspace, alpha=alpha, alpha_values=avals,
        M=M, K=symmetrize(QT @ ops["K"] @ Q), B=symmetrize(QT @ Bfull @ Q),
        D=(ops["D"] @ Q).tocsr(), Mp=ops["Mp"],
        H1=symmetrize(M + QT @ ops["Grad"] @ Q), Bfull=Bfull)


def assemble(mesh: Mesh, frame: BoundaryFrame | None = None, alpha: SlipCoefficient | None = None,
             *, kind: str = "slip", isoparametric: bool = True, space: FunctionSpace | None = None) -> OperatorSet:
    """Assemble the constrained operator set for slip coefficient `alpha`."""
    if frame is None:
        frame = boundary_frame(mesh, BOUNDARY_DEGREE)
    if len(frame) and frame.edge.max() >= mesh.n_boundary_edges:
        raise InconsistentChartError("boundary frame does not belong to this mesh")
    if space is None:
        space = FunctionSpace(mesh, isoparametric=isoparametric)
    if alpha is None and kind == "slip":
        alpha = SlipCoefficient.constant(0.0)
    return _restricted(mesh, frame, space, ConstrainedSpace(space, kind), alpha if kind == "slip" else None)


# --------------------------------------------------------------------------
# Helmholtz projection and Green's formula


def discrete_gradient(ops: OperatorSet, chi):
    """Reduced velocity field M^{-1} D^T chi (adjoint of the discrete divergence)."""
    from scipy.sparse.linalg import splu
    if "Mlu" not in ops._cache:
        ops._cache["Mlu"] = splu(ops.M.tocsc())
    return ops._cache["Mlu"].solve(np.asarray(ops.D.T @ chi))


def helmholtz_project(ops: OperatorSet, psi, *, full=True):
    """Discrete Leray projection of psi.

    psi is a full nodal vector (``full=True``) or reduced coefficients.  The
    projection is M-orthogonal onto discretely divergence-free constrained
    fields; the returned potential is the zero-mean pressure-like multiplier.
    """
    psi = np.asarray(psi)
    rhs = ops.cspace.restrict(ops.Mfull @ psi) if full else ops.M @ psi
    sys = ops.projector()
    u, p, _ = sys.solve(rhs)
    return u, ops.zero_mean(p)


def greens_formula_check(ops: OperatorSet, v, pi, degree=8):
    """max over reduced basis fields phi of |lhs - rhs| / ||phi||_{H1}.

    lhs = (-Lap v + grad pi, phi); rhs = 2 (Dv, D phi) - (pi, div phi)
    - 2 <[(Dv) n]_tau, phi>_Gamma.  The pressure term vanishes for
    divergence-free test fields and is kept because the basis fields are not.
    """
    space = ops.space
    q = space.quadrature(degree)
    x, y = q.points[..., 0], q.points[..., 1]
    lhs_f = -v.laplacian(x, y) + pi.gradient(x, y)
    J = v.jacobian(x, y)
    Dv = 0.5 * (J + np.swapaxes(J, -1, -2))
    pv = pi.value(x, y)
    W = q.weights
    # phi = N_a e_c: lhs_{a,c} = sum W f_c N_a ; D-part: 2 Dv_{c j} d_j N_a ; pressure: pi d_c N_a
    lhs = np.einsum("nq,nqc,qa->nac", W, lhs_f, q.phi)
    rhs = 2.0 * np.einsum("nq,nqcj,nqaj->nac", W, Dv, q.grad) - np.einsum("nq,nq,nqac->nac", W, pv, q.grad)
    nc = len(W)
    vec = np.zeros(space.n_full)
    np.add.at(vec, space.cell_dofs.ravel(), (lhs - rhs).reshape(nc, 12).ravel())
    fr = ops.frame
    cell, N, _ = space.boundary_basis(fr)
    bx, by = fr.position[:, 0], fr.position[:, 1]
    Jb = v.jacobian(bx, by)
    Db = 0.5 * (Jb + np.swapaxes(Jb, -1, -2))
    st = np.einsum("qij,qj->qi", Db, fr.normal)
    st_t = np.einsum("qi,qi->q", st, fr.tangent)[:, None] * fr.tangent
    bl = 2.0 * np.einsum("q,qi,qa->qai", fr.weight, st_t, N).reshape(len(N), 12)
    np.add.at(vec, space.cell_dofs[cell].ravel(), bl.ravel())
    r = ops.cspace.restrict(vec)
    norms = np.sqrt(ops.H1.diagonal())
    return float(np.max(np.abs(r) / norms))
