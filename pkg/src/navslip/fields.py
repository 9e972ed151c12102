"""Closed-form vector and scalar fields with symbolic derivatives.

Fields are built from sympy expressions once and lambdified; they serve as
exact data for manufactured solutions and as oracles for the boundary
identities.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import sympy as sp

X, Y = sp.symbols("x y", real=True)


def _lam(expr):
    f = sp.lambdify((X, Y), expr, "numpy")

    def call(x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return np.broadcast_to(np.asarray(f(x, y), dtype=float), np.broadcast(x, y).shape)

    return call


class VectorField:
    """Vector field (u, v) with value, Jacobian, Laplacian and divergence."""

    def __init__(self, name, u, v):
        self.name = name
        self.expr = (sp.sympify(u), sp.sympify(v))
        comps = self.expr
        self._val = [_lam(c) for c in comps]
        self._jac = [[_lam(sp.diff(c, s)) for s in (X, Y)] for c in comps]
        self._lap = [_lam(sp.diff(c, X, 2) + sp.diff(c, Y, 2)) for c in comps]
        self._div = _lam(sp.diff(comps[0], X) + sp.diff(comps[1], Y))

    def __repr__(self):
        return f"VectorField({self.name!r})"

    def value(self, x, y):
        return np.stack([f(x, y) for f in self._val], axis=-1)

    def __call__(self, x, y):
        return self.value(x, y)

    def jacobian(self, x, y):
        return np.stack([np.stack([f(x, y) for f in row], axis=-1) for row in self._jac], axis=-2)

    def laplacian(self, x, y):
        return np.stack([f(x, y) for f in self._lap], axis=-1)

    def divergence(self, x, y):
        return self._div(x, y)

    def scaled(self, c, name=None):
        return VectorField(name or f"{c}*{self.name}", c * self.expr[0], c * self.expr[1])


class ScalarField:
    def __init__(self, name, p):
        self.name = name
        self.expr = sp.sympify(p)
        self._val = _lam(self.expr)
        self._grad = [_lam(sp.diff(self.expr, s)) for s in (X, Y)]

    def __repr__(self):
        return f"ScalarField({self.name!r})"

    def value(self, x, y):
        return self._val(x, y)

    def __call__(self, x, y):
        return self.value(x, y)

    def gradient(self, x, y):
        return np.stack([f(x, y) for f in self._grad], axis=-1)


def from_stream(name, psi):
    """Divergence-free field (d psi/dy, -d psi/dx)."""
    psi = sp.sympify(psi)
    return VectorField(name, sp.diff(psi, Y), -sp.diff(psi, X))


ZERO_PRESSURE = ScalarField("zero", 0)


# --------------------------------------------------------------------------
# the built-in suite


def rigid_rotation():
    return VectorField("rigid_rotation", -Y, X)


def rotation_r2():
    return VectorField("rotation_r2", -Y * (X ** 2 + Y ** 2), X * (X ** 2 + Y ** 2))


def channel_shear(H=1.0):
    return VectorField("channel_shear", Y * (H - Y), 0)


def channel_translation():
    return VectorField("channel_translation", 1, 0)


def channel_cell(L=2.0, H=1.0):
    return from_stream("channel_cell", sp.sin(2 * sp.pi * X / L) * Y ** 2 * (H - Y) ** 2)


def channel_wavy(L=2.0, H=1.0):
    """Tangential at the walls with nonzero slip velocity there."""
    return from_stream("channel_wavy", sp.sin(2 * sp.pi * X / L) * Y * (H - Y) + Y ** 2 / 2 - Y ** 3 / (3 * H))


def swirl(R0=0.5, R1=1.0):
    r2 = X ** 2 + Y ** 2
    return VectorField("swirl", -Y * (1 + r2), X * (1 + r2))


def disk_stream(R=1.0):
    """Tangential on r = R, nonzero slip velocity, no rotational symmetry."""
    r2 = X ** 2 + Y ** 2
    return from_stream("disk_stream", (R ** 2 - r2) * (1 + X + Y ** 2 / 2))


def disk_bubble(R=1.0):
    """Stream function with a double zero on r = R, so u = 0 on the circle."""
    r2 = X ** 2 + Y ** 2
    return from_stream("disk_bubble", (R ** 2 - r2) ** 2 * (1 + X / 2))


def annulus_stream(R0=0.5, R1=1.0):
    r2 = X ** 2 + Y ** 2
    return from_stream("annulus_stream", (R1 ** 2 - r2) * (r2 - R0 ** 2) * (1 + X))


def smooth_suite(spec):
    """Smooth tangential fields for the boundary identity checks on `spec`."""
    if spec.kind == "disk":
        R = spec.R
        return [rigid_rotation(), rotation_r2(), swirl(), disk_stream(R), disk_bubble(R)]
    if spec.kind == "annulus":
        return [rigid_rotation(), rotation_r2(), swirl(), annulus_stream(spec.R0, spec.R1)]
    return [channel_shear(spec.H), channel_translation(), channel_cell(spec.L, spec.H),
            channel_wavy(spec.L, spec.H)]


# --------------------------------------------------------------------------
# manufactured solutions


@dataclass
class ManufacturedCase:
    """Exact (u, pi) with the interior forcing and slip data they induce.

    forcing(x, y) = lam u - Lap u + grad pi; slip_data evaluates
    2[(Du)n]_tau + alpha u_tau on a boundary frame (tangential scalar).
    """

    case_id: str
    velocity: VectorField
    pressure: ScalarField
    lam: complex = 0.0

    def forcing(self, x, y):
        u = self.velocity
        return self.lam * u.value(x, y) - u.laplacian(x, y) + self.pressure.gradient(x, y)

    def slip_data(self, frame, alpha_values):
        x, y = frame.position[:, 0], frame.position[:, 1]
        J = self.velocity.jacobian(x, y)
        D = 0.5 * (J + np.swapaxes(J, -1, -2))
        stress = 2.0 * np.einsum("qij,qj->qi", D, frame.normal)
        ut = np.einsum("qi,qi->q", self.velocity.value(x, y), frame.tangent)
        return np.einsum("qi,qi->q", stress, frame.tangent) + alpha_values * ut

    def check(self, spec, frame):
        """Symbolic divergence and boundary normal trace (both must vanish)."""
        u = self.velocity
        div = sp.simplify(sp.diff(u.expr[0], X) + sp.diff(u.expr[1], Y))
        x, y = frame.position[:, 0], frame.position[:, 1]
        vn = np.einsum("qi,qi->q", u.value(x, y), frame.normal)
        return div == 0 and float(np.abs(vn).max()) < 1e-10


def manufactured(spec, lam=0.0):
    if spec.kind == "channel":
        L, H = spec.L, spec.H
        u = channel_wavy(L, H)
        p = ScalarField("p_channel", sp.sin(2 * sp.pi * X / L) * sp.cos(sp.pi * Y / H))
        return ManufacturedCase("channel_wavy", u, p, lam)
    if spec.kind == "disk":
        return ManufacturedCase("disk_stream", disk_stream(spec.R), ScalarField("p_disk", X * Y + X), lam)
    return ManufacturedCase("annulus_stream", annulus_stream(spec.R0, spec.R1),
                            ScalarField("p_annulus", X), lam)
