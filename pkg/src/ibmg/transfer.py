"""Inter-level transfer operators.

Velocity prolongation is lowest-order Raviart-Thomas interpolation on
quadrilaterals: linear in the face-normal direction, constant in the
tangential direction within each coarse cell.  Velocity restriction is its
adjoint with respect to the grid-weighted inner products, R_u = P_u^*, which
in entries is (1/4) P_u^T for a 2:1 refinement in 2D.  Pressure is prolonged
by bilinear interpolation (one-sided extrapolation at boundary cells) and
restricted by averaging the four child cells; these two are deliberately not
adjoint to each other.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .grid import StaggeredLevel


def _prolong_normal_linear(coarse: np.ndarray) -> np.ndarray:
    """Linear interpolation along axis 0 from nc+1 face rows to 2*nc+1."""
    nc = coarse.shape[0] - 1
    out = np.empty((2 * nc + 1,) + coarse.shape[1:])
    out[0::2] = coarse
    out[1::2] = 0.5 * (coarse[:-1] + coarse[1:])
    return out


def prolong_velocity(
    u1c: np.ndarray, u2c: np.ndarray, fine: StaggeredLevel
) -> tuple[np.ndarray, np.ndarray]:
    """RT0 prolongation of a coarse face field to the next finer level."""
    nc = fine.n // 2
    if u1c.shape != (nc + 1, nc) or u2c.shape != (nc, nc + 1):
        raise ValueError("coarse velocity shape mismatch")
    u1f = _prolong_normal_linear(np.repeat(u1c, 2, axis=1))
    u2f = _prolong_normal_linear(np.repeat(u2c, 2, axis=0).T).T
    return u1f, u2f


def _restrict_normal_adjoint(fine: np.ndarray) -> np.ndarray:
    """Adjoint of linear interpolation along axis 0 (2*nc+1 rows -> nc+1)."""
    even = fine[0::2]
    odd = fine[1::2]
    out = even.astype(float, copy=True)
    out[:-1] += 0.5 * odd
    out[1:] += 0.5 * odd
    return out


def restrict_velocity(
    u1f: np.ndarray, u2f: np.ndarray, coarse: StaggeredLevel
) -> tuple[np.ndarray, np.ndarray]:
    """Grid-weighted adjoint of prolong_velocity: (1/4) P^T in entries."""
    nf = 2 * coarse.n
    if u1f.shape != (nf + 1, nf) or u2f.shape != (nf, nf + 1):
        raise ValueError("fine velocity shape mismatch")
    t1 = u1f[:, 0::2] + u1f[:, 1::2]
    u1c = 0.25 * _restrict_normal_adjoint(t1)
    t2 = u2f[0::2, :] + u2f[1::2, :]
    u2c = 0.25 * _restrict_normal_adjoint(t2.T).T
    return u1c, u2c


def _prolong_centers_1d(coarse: np.ndarray) -> np.ndarray:
    """Linear interpolation of cell-center data along axis 0, extrapolated
    one cell past each boundary so edge fine cells stay second order."""
    nc = coarse.shape[0]
    pad = np.empty((nc + 2,) + coarse.shape[1:])
    pad[1:-1] = coarse
    pad[0] = 2.0 * coarse[0] - coarse[1]
    pad[-1] = 2.0 * coarse[-1] - coarse[-2]
    out = np.empty((2 * nc,) + coarse.shape[1:])
    out[0::2] = 0.75 * pad[1:-1] + 0.25 * pad[:-2]
    out[1::2] = 0.75 * pad[1:-1] + 0.25 * pad[2:]
    return out


def prolong_pressure(pc: np.ndarray, fine: StaggeredLevel) -> np.ndarray:
    """Bilinear prolongation of cell-centered data to the finer level."""
    nc = fine.n // 2
    if pc.shape != (nc, nc):
        raise ValueError("coarse pressure shape mismatch")
    return _prolong_centers_1d(_prolong_centers_1d(pc).T).T


def restrict_pressure(pf: np.ndarray, coarse: StaggeredLevel) -> np.ndarray:
    """Arithmetic mean of the four child cells."""
    nf = 2 * coarse.n
    if pf.shape != (nf, nf):
        raise ValueError("fine pressure shape mismatch")
    return 0.25 * (pf[0::2, 0::2] + pf[1::2, 0::2] + pf[0::2, 1::2] + pf[1::2, 1::2])


def build_P_u(coarse: StaggeredLevel, fine: StaggeredLevel) -> sp.csr_matrix:
    """Sparse RT0 velocity prolongation over flat velocity DOFs."""
    if fine.n != 2 * coarse.n:
        raise ValueError("levels are not a 2:1 pair")
    nc, nf = coarse.n, fine.n
    rows, cols, vals = [], [], []

    def fine_u1(i, j):
        return i * nf + j

    def coarse_u1(i, j):
        return i * nc + j

    def fine_u2(i, j):
        return fine.n_u1 + i * (nf + 1) + j

    def coarse_u2(i, j):
        return coarse.n_u1 + i * (nc + 1) + j

    # u1: fine face (i, j) with J = j // 2; even i copies coarse face i/2,
    # odd i averages coarse faces (i-1)/2 and (i+1)/2.
    ie, j = np.meshgrid(np.arange(0, nf + 1, 2), np.arange(nf), indexing="ij")
    rows.append(fine_u1(ie, j).ravel())
    cols.append(coarse_u1(ie // 2, j // 2).ravel())
    vals.append(np.ones(ie.size))
    io, j = np.meshgrid(np.arange(1, nf, 2), np.arange(nf), indexing="ij")
    r = fine_u1(io, j).ravel()
    rows += [r, r]
    cols += [coarse_u1((io - 1) // 2, j // 2).ravel(), coarse_u1((io + 1) // 2, j // 2).ravel()]
    vals += [np.full(r.size, 0.5), np.full(r.size, 0.5)]

    i, je = np.meshgrid(np.arange(nf), np.arange(0, nf + 1, 2), indexing="ij")
    rows.append(fine_u2(i, je).ravel())
    cols.append(coarse_u2(i // 2, je // 2).ravel())
    vals.append(np.ones(i.size))
    i, jo = np.meshgrid(np.arange(nf), np.arange(1, nf, 2), indexing="ij")
    r = fine_u2(i, jo).ravel()
    rows += [r, r]
    cols += [coarse_u2(i // 2, (jo - 1) // 2).ravel(), coarse_u2(i // 2, (jo + 1) // 2).ravel()]
    vals += [np.full(r.size, 0.5), np.full(r.size, 0.5)]

    return sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(fine.n_u, coarse.n_u),
    )


def build_R_u(coarse: StaggeredLevel, fine: StaggeredLevel) -> sp.csr_matrix:
    """Sparse velocity restriction R_u = (1/4) P_u^T."""
    return (0.25 * build_P_u(coarse, fine).T).tocsr()
