"""Point-relaxation kernels on CSR matrices (numba-compiled).

These are the building blocks of the Schur-complement smoother: triangular
Gauss-Seidel sweeps and the symmetric Gauss-Seidel preconditioner solve
z = (D+U)^{-1} D (D+L)^{-1} r.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from numba import njit


@njit(cache=True)
def _lower_solve(indptr, indices, data, diag, b, out):
    n = b.shape[0]
    for row in range(n):
        s = b[row]
        for k in range(indptr[row], indptr[row + 1]):
            col = indices[k]
            if col < row:
                s -= data[k] * out[col]
        out[row] = s / diag[row]


@njit(cache=True)
def _upper_solve(indptr, indices, data, diag, b, out):
    n = b.shape[0]
    for row in range(n - 1, -1, -1):
        s = b[row]
        for k in range(indptr[row], indptr[row + 1]):
            col = indices[k]
            if col > row:
                s -= data[k] * out[col]
        out[row] = s / diag[row]


class CSRRelaxation:
    """Caches the CSR parts and diagonal of a matrix for GS sweeps."""

    def __init__(self, mat: sp.spmatrix):
        mat = sp.csr_matrix(mat)
        mat.sum_duplicates()
        self.indptr = mat.indptr
        self.indices = mat.indices
        self.data = mat.data
        self.diag = mat.diagonal().copy()
        if np.any(self.diag == 0.0):
            raise ValueError("zero diagonal entry; Gauss-Seidel is undefined")
        self.n = mat.shape[0]

    def sgs_solve(self, r: np.ndarray) -> np.ndarray:
        """Apply the symmetric Gauss-Seidel preconditioner to r."""
        y = np.zeros_like(r)
        _lower_solve(self.indptr, self.indices, self.data, self.diag, r, y)
        z = np.zeros_like(r)
        _upper_solve(self.indptr, self.indices, self.data, self.diag, self.diag * y, z)
        return z


def chebyshev(apply_op, apply_prec, b: np.ndarray, iters: int, lam_min: float, lam_max: float) -> np.ndarray:
    """Preconditioned Chebyshev semi-iteration for op x = b, from x = 0.

    The eigenvalues of prec^{-1} op are assumed to lie in [lam_min, lam_max].
    Returns the iterate after ``iters`` corrections.
    """
    theta = 0.5 * (lam_max + lam_min)
    delta = 0.5 * (lam_max - lam_min)
    sigma = theta / delta
    rho = 1.0 / sigma
    r = b.copy()
    d = apply_prec(r) / theta
    x = np.zeros_like(b)
    for k in range(iters):
        x += d
        if k == iters - 1:
            break
        r -= apply_op(d)
        z = apply_prec(r)
        rho_next = 1.0 / (2.0 * sigma - rho)
        d = rho_next * rho * d + (2.0 * rho_next / delta) * z
        rho = rho_next
    return x


def power_estimate(apply_op, n: int, iters: int = 10, seed: int = 0) -> float:
    """Largest-magnitude eigenvalue estimate by power iteration."""
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(n)
    x /= np.linalg.norm(x)
    lam = 1.0
    for _ in range(iters):
        y = apply_op(x)
        ny = np.linalg.norm(y)
        if ny == 0.0:
            return lam
        lam = ny
        x = y / ny
    return lam
