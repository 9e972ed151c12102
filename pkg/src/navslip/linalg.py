"""Sparse helpers: canonical COO accumulation and bordered saddle-point solves."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sps
from scipy.sparse.linalg import splu

from .errors import SolverError


class Pattern:
    """Fixed sparsity pattern for repeated accumulation of element contributions.

    Duplicates are summed with ``np.bincount`` in input order after a stable
    sort by global (row, col) index, so the result is bitwise reproducible.
    """

    def __init__(self, rows, cols, shape):
        rows = np.asarray(rows, dtype=np.int64).ravel()
        cols = np.asarray(cols, dtype=np.int64).ravel()
        key = rows * shape[1] + cols
        self.order = np.argsort(key, kind="stable")
        skey = key[self.order]
        uniq, self.inverse = np.unique(skey, return_inverse=True)
        self.inverse = self.inverse.ravel()
        self.rows = uniq // shape[1]
        self.cols = uniq % shape[1]
        self.shape = shape

    def matrix(self, values):
        vals = np.asarray(values).ravel()[self.order]
        if np.iscomplexobj(vals):
            data = (np.bincount(self.inverse, vals.real, len(self.rows))
                    + 1j * np.bincount(self.inverse, vals.imag, len(self.rows)))
        else:
            data = np.bincount(self.inverse, vals, len(self.rows))
        return sps.csr_matrix((data, (self.rows, self.cols)), shape=self.shape)


def accumulate(rows, cols, values, shape):
    return Pattern(rows, cols, shape).matrix(values)


def symmetrize(A):
    """Exactly symmetric copy: fp addition commutes, so (A + A^T)/2 is bitwise symmetric."""
    A = sps.csr_matrix(A)
    return ((A + A.T) * 0.5).tocsr()


def coo_text(A):
    """'row col value' lines sorted lexicographically by (row, col)."""
    C = sps.coo_matrix(A)
    order = np.lexsort((C.col, C.row))
    return "".join(f"{r} {c} {v:.17g}\n" for r, c, v in zip(C.row[order], C.col[order], C.data[order]))


class SaddleSystem:
    """Direct solver for

        [ A   D^T  0   MR ] [u]   [F]
        [ D   0    m   0  ] [p] = [G]
        [ 0   m^T  0   0  ] [g]   [0]
        [ RM  0    0   0  ] [b]   [0]

    m is the pressure mean functional (zero-mean pressure), R optional kernel
    modes filtered from data and solution.
    """

    def __init__(self, A, D, mean, modes=None, M=None, rtol=1e-10):
        A = sps.csr_matrix(A)
        D = sps.csr_matrix(D)
        n, npr = A.shape[0], D.shape[0]
        mean = np.asarray(mean, dtype=float).reshape(-1, 1)
        self.n, self.np = n, npr
        self.k = 0 if modes is None else modes.shape[1]
        blocks = [[A, D.T, None], [D, None, sps.csr_matrix(mean)],
                  [None, sps.csr_matrix(mean.T), None]]
        if self.k:
            MR = sps.csr_matrix(M @ modes)
            blocks[0].append(MR)
            blocks[1].append(None)
            blocks[2].append(None)
            blocks.append([MR.T, None, None, None])
        self.S = sps.bmat(blocks, format="csc")
        self.dtype = self.S.dtype
        self.rtol = rtol
        try:
            self.lu = splu(self.S, permc_spec="COLAMD")
        except RuntimeError as exc:
            raise SolverError(f"factorization failed: {exc}", size=self.S.shape[0]) from exc

    def solve(self, F, G=None):
        """Returns (u, p, extras) with extras = [mean multiplier, mode multipliers...]."""
        F = np.asarray(F)
        dtype = np.result_type(self.dtype, F.dtype)
        b = np.zeros(self.S.shape[0], dtype=dtype)
        b[:self.n] = F
        if G is not None:
            b[self.n:self.n + self.np] = G
        bnorm = np.linalg.norm(b)
        if bnorm == 0:
            x = np.zeros_like(b)
            self.last_residual = 0.0
        else:
            x = self._lu_solve(b)
            for _ in range(4):
                r = b - self.S @ x
                res = np.linalg.norm(r) / bnorm
                if res <= 0.01 * self.rtol:
                    break
                x = x + self._lu_solve(r)
            res = np.linalg.norm(b - self.S @ x) / bnorm
            self.last_residual = float(res)
            if not res <= self.rtol:
                raise SolverError(f"saddle solve residual {res:.3e} above {self.rtol:.1e}",
                                  residual=res, size=self.S.shape[0])
        n, npr = self.n, self.np
        return x[:n], x[n:n + npr], x[n + npr:]

    def _lu_solve(self, b):
        if np.iscomplexobj(b) and not np.iscomplexobj(self.S.data):
            return self.lu.solve(b.real) + 1j * self.lu.solve(b.imag)
        return self.lu.solve(b)
