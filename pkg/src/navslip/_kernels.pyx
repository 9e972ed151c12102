# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled element kernels; same contract as ``_kernels_py``."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def local_mass(double[:, ::1] phi, double[:, ::1] W):
    cdef Py_ssize_t nc = W.shape[0], nq = W.shape[1]
    cdef Py_ssize_t c, q, a, b
    cdef double w, pa
    out = np.zeros((nc, 6, 6))
    cdef double[:, :, ::1] o = out
    for c in range(nc):
        for q in range(nq):
            w = W[c, q]
            for a in range(6):
                pa = w * phi[q, a]
                for b in range(6):
                    o[c, a, b] += pa * phi[q, b]
    return out


def local_gradgrad(double[:, :, :, ::1] G, double[:, ::1] W):
    cdef Py_ssize_t nc = W.shape[0], nq = W.shape[1]
    cdef Py_ssize_t c, q, a, b
    cdef double w, gx, gy
    out = np.zeros((nc, 6, 6))
    cdef double[:, :, ::1] o = out
    for c in range(nc):
        for q in range(nq):
            w = W[c, q]
            for a in range(6):
                gx = w * G[c, q, a, 0]
                gy = w * G[c, q, a, 1]
                for b in range(6):
                    o[c, a, b] += gx * G[c, q, b, 0] + gy * G[c, q, b, 1]
    return out


def local_symgrad(double[:, :, :, ::1] G, double[:, ::1] W):
    cdef Py_ssize_t nc = W.shape[0], nq = W.shape[1]
    cdef Py_ssize_t c, q, a, b, i, j
    cdef double w, dot, gai, gbj
    out = np.zeros((nc, 12, 12))
    cdef double[:, :, ::1] o = out
    for c in range(nc):
        for q in range(nq):
            w = W[c, q]
            for a in range(6):
                for b in range(6):
                    dot = w * (G[c, q, a, 0] * G[c, q, b, 0] + G[c, q, a, 1] * G[c, q, b, 1])
                    o[c, 2 * a, 2 * b] += dot
                    o[c, 2 * a + 1, 2 * b + 1] += dot
                    # cross term d_j phi_a * d_i phi_b for row comp i, col comp j
                    for i in range(2):
                        gbj = w * G[c, q, b, i]
                        for j in range(2):
                            o[c, 2 * a + i, 2 * b + j] += G[c, q, a, j] * gbj
    return out


def local_div(double[:, :, :, ::1] G, double[:, ::1] P, double[:, ::1] W):
    cdef Py_ssize_t nc = W.shape[0], nq = W.shape[1]
    cdef Py_ssize_t c, q, k, a
    cdef double wk
    out = np.zeros((nc, 3, 12))
    cdef double[:, :, ::1] o = out
    for c in range(nc):
        for q in range(nq):
            for k in range(3):
                wk = W[c, q] * P[q, k]
                for a in range(6):
                    o[c, k, 2 * a] -= wk * G[c, q, a, 0]
                    o[c, k, 2 * a + 1] -= wk * G[c, q, a, 1]
    return out


def local_convection(double[:, ::1] phi, double[:, :, :, ::1] G, double[:, ::1] W,
                     double[:, :, ::1] wq):
    cdef Py_ssize_t nc = W.shape[0], nq = W.shape[1]
    cdef Py_ssize_t c, q, a, b
    cdef double w, s
    cdef double adv[6]
    cdef double N[6][6]
    out = np.zeros((nc, 12, 12))
    cdef double[:, :, ::1] o = out
    for c in range(nc):
        for a in range(6):
            for b in range(6):
                N[b][a] = 0.0
        for q in range(nq):
            w = W[c, q]
            for a in range(6):
                adv[a] = wq[c, q, 0] * G[c, q, a, 0] + wq[c, q, 1] * G[c, q, a, 1]
            for b in range(6):
                for a in range(6):
                    N[b][a] += w * adv[a] * phi[q, b]
        for b in range(6):
            for a in range(6):
                s = 0.5 * (N[b][a] - N[a][b])
                o[c, 2 * b, 2 * a] = s
                o[c, 2 * b + 1, 2 * a + 1] = s
    return out
