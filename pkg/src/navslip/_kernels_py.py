"""Pure-numpy element kernels (fallback for the compiled ``_kernels`` module).

Array conventions shared with the Cython version:

phi : (nq, 6)          P2 basis values at reference quadrature points
G   : (nc, nq, 6, 2)   physical basis gradients
W   : (nc, nq)         quadrature weights times |det J|
P   : (nq, 3)          P1 basis values
wq  : (nc, nq, 2)      advecting velocity at quadrature points

Vector local dofs are ordered 2*a + c (node a, component c).
"""

import numpy as np


def local_mass(phi, W):
    return np.einsum("nq,qa,qb->nab", W, phi, phi)


def local_gradgrad(G, W):
    return np.einsum("nq,nqai,nqbi->nab", W, G, G)


def _expand_diag(S):
    nc = S.shape[0]
    out = np.zeros((nc, 12, 12))
    out[:, 0::2, 0::2] = S
    out[:, 1::2, 1::2] = S
    return out


def local_symgrad(G, W):
    """2 (D phi_a e_c) : (D phi_b e_d) integrated; rows (a, c), cols (b, d)."""
    out = _expand_diag(local_gradgrad(G, W))
    # cross term d_d phi_a * d_c phi_b
    X = np.einsum("nq,nqaj,nqbi->naibj", W, G, G)
    out += X.reshape(G.shape[0], 12, 12)
    return out


def local_div(G, P, W):
    """-(psi_k, d_c phi_a); rows k (pressure), cols (a, c)."""
    nc = G.shape[0]
    return -np.einsum("nq,qk,nqai->nkai", W, P, G).reshape(nc, 3, 12)


def local_convection(phi, G, W, wq):
    """Skew form 1/2[((w.grad) u, v) - ((w.grad) v, u)]; rows test (b, d), cols trial (a, c)."""
    adv = np.einsum("nqi,nqai->nqa", wq, G)
    N = np.einsum("nq,nqa,qb->nba", W, adv, phi)
    S = 0.5 * (N - np.swapaxes(N, 1, 2))
    return _expand_diag(S)
