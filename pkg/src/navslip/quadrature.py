"""Reference quadrature rules on the unit triangle and the unit interval."""

from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi, roots_legendre


@lru_cache(maxsize=None)
def triangle_rule(degree):
    """Collapsed Gauss rule on {xi, eta >= 0, xi + eta <= 1}, exact to `degree`.

    Returns (points (nq, 2), weights (nq,)); weights sum to 1/2.
    """
    n = max(1, (degree + 2) // 2)
    # Gauss-Jacobi(1, 0) absorbs the Duffy Jacobian (1 - a) in the collapsed direction.
    a, wa = roots_jacobi(n, 1.0, 0.0)
    b, wb = roots_legendre(n)
    a = 0.5 * (a + 1.0)
    wa = wa / 4.0
    b = 0.5 * (b + 1.0)
    wb = wb / 2.0
    xi = np.outer(a, np.ones(n)).ravel()
    s = np.outer(np.ones(n), b).ravel()
    eta = (1.0 - xi) * s
    pts = np.column_stack([xi, eta])
    w = np.outer(wa, wb).ravel()
    pts.setflags(write=False)
    w.setflags(write=False)
    return pts, w


@lru_cache(maxsize=None)
def line_rule(degree):
    """Gauss-Legendre rule on [0, 1] exact to `degree`."""
    n = max(1, (degree + 2) // 2)
    x, w = roots_legendre(n)
    x = 0.5 * (x + 1.0)
    w = 0.5 * w
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w
