"""Second-order staggered finite-difference operators on one MAC level.

The momentum operator is A = (rho/dt) I - mu * Lap_h applied componentwise,
G is the face gradient, D the cell divergence.  All operators act on the
homogeneous form of the boundary conditions: wall faces are identity rows,
tangential wall conditions enter through ghost values linearly extrapolated
through the wall (ghost = 2 * wall_value - first_interior, with wall_value = 0
in the operator), and the inhomogeneous lid data is moved to the right-hand
side by ``build_rhs``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .grid import BlockVector, StaggeredLevel


@dataclass(frozen=True)
class FluidParams:
    """Density, viscosity and time step.  rho = 0 selects Stokes flow."""

    rho: float
    mu: float
    dt: float

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.mu < 0 or self.rho < 0:
            raise ValueError("mu and rho must be nonnegative")
        if self.mu == 0 and self.rho == 0:
            raise ValueError("need mu > 0 or rho > 0")


def _default_lid(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 - np.cos(2.0 * np.pi * np.asarray(x)))


@dataclass(frozen=True)
class CavityBC:
    """Regularized lid-driven cavity: u = lid(x) on the top wall, 0 elsewhere."""

    lid_profile: Callable[[np.ndarray], np.ndarray] = field(default=_default_lid)

    def __post_init__(self):
        ends = np.asarray(self.lid_profile(np.array([0.0, 1.0])), dtype=float)
        if np.max(np.abs(ends)) > 1e-12:
            raise ValueError("lid profile must vanish at the corners x=0 and x=1")


def apply_A(
    params: FluidParams,
    u1: np.ndarray,
    u2: np.ndarray,
    level: StaggeredLevel,
) -> tuple[np.ndarray, np.ndarray]:
    """(rho/dt) u - mu Lap_h u componentwise; identity on wall faces."""
    if u1.shape != level.shape_u1 or u2.shape != level.shape_u2:
        raise ValueError("velocity shape mismatch")
    h2 = level.h * level.h
    a = params.rho / params.dt
    mu = params.mu

    # u1: x is the normal direction (neighbors are stored faces), y tangential
    # (ghost rows fold into the wall-adjacent stencil).
    g_lo = -u1[:, :1]
    g_hi = -u1[:, -1:]
    u1p = np.concatenate([g_lo, u1, g_hi], axis=1)
    d2y = (u1p[:, :-2] - 2.0 * u1 + u1p[:, 2:]) / h2
    out1 = a * u1 - mu * d2y
    out1[1:-1, :] -= mu * (u1[:-2, :] - 2.0 * u1[1:-1, :] + u1[2:, :]) / h2
    out1[0, :] = u1[0, :]
    out1[-1, :] = u1[-1, :]

    g_lo = -u2[:1, :]
    g_hi = -u2[-1:, :]
    u2p = np.concatenate([g_lo, u2, g_hi], axis=0)
    d2x = (u2p[:-2, :] - 2.0 * u2 + u2p[2:, :]) / h2
    out2 = a * u2 - mu * d2x
    out2[:, 1:-1] -= mu * (u2[:, :-2] - 2.0 * u2[:, 1:-1] + u2[:, 2:]) / h2
    out2[:, 0] = u2[:, 0]
    out2[:, -1] = u2[:, -1]
    return out1, out2


def apply_G(p: np.ndarray, level: StaggeredLevel) -> tuple[np.ndarray, np.ndarray]:
    """Face gradient of a cell-centered field; zero rows on wall faces."""
    if p.shape != level.shape_p:
        raise ValueError("pressure shape mismatch")
    h = level.h
    g1 = np.zeros(level.shape_u1)
    g1[1:-1, :] = (p[1:, :] - p[:-1, :]) / h
    g2 = np.zeros(level.shape_u2)
    g2[:, 1:-1] = (p[:, 1:] - p[:, :-1]) / h
    return g1, g2


def apply_D(u1: np.ndarray, u2: np.ndarray, level: StaggeredLevel) -> np.ndarray:
    """Cell divergence of a face field (wall faces contribute their values)."""
    if u1.shape != level.shape_u1 or u2.shape != level.shape_u2:
        raise ValueError("velocity shape mismatch")
    h = level.h
    return (u1[1:, :] - u1[:-1, :]) / h + (u2[:, 1:] - u2[:, :-1]) / h


def build_rhs(
    params: FluidParams,
    bc: CavityBC,
    spread_force: tuple[np.ndarray, np.ndarray],
    level: StaggeredLevel,
) -> BlockVector:
    """Assemble the block right-hand side: forcing plus boundary lift.

    ``spread_force`` is the full velocity-block forcing evaluated by the
    caller (structure force spread to the grid plus (rho/dt) u^n).  The lid
    data enters only here, through the ghost-extrapolation lift on the
    top row of u1 faces; the pressure block is zero.
    """
    f1, f2 = spread_force
    if f1.shape != level.shape_u1 or f2.shape != level.shape_u2:
        raise ValueError("forcing shape mismatch")
    b = BlockVector(level)
    b.u1[:] = f1
    b.u2[:] = f2
    h = level.h
    i = np.arange(1, level.n)
    b.u1[1:-1, -1] += 2.0 * params.mu * np.asarray(bc.lid_profile(i * h)) / (h * h)
    # wall faces hold the prescribed (homogeneous-form) values
    b.u1[0, :] = 0.0
    b.u1[-1, :] = 0.0
    b.u2[:, 0] = 0.0
    b.u2[:, -1] = 0.0
    return b


def _flat_u1(level: StaggeredLevel, i: np.ndarray, j: np.ndarray) -> np.ndarray:
    return i * level.n + j


def _flat_u2(level: StaggeredLevel, i: np.ndarray, j: np.ndarray) -> np.ndarray:
    return level.n_u1 + i * (level.n + 1) + j


def _flat_p(level: StaggeredLevel, i: np.ndarray, j: np.ndarray) -> np.ndarray:
    return level.n_u + i * level.n + j


def assemble_A(params: FluidParams, level: StaggeredLevel) -> sp.csr_matrix:
    """Sparse matrix of apply_A over the flat velocity DOFs."""
    n = level.n
    h2 = level.h * level.h
    a = params.rho / params.dt
    mu_h2 = params.mu / h2
    rows, cols, vals = [], [], []

    def add(r, c, v):
        rows.append(r.ravel())
        cols.append(c.ravel())
        vals.append(np.broadcast_to(v, r.shape).ravel())

    # u1 rows, unknowns at i = 1..n-1
    i, j = np.meshgrid(np.arange(1, n), np.arange(n), indexing="ij")
    center = a + 2.0 * mu_h2 + np.where((j == 0) | (j == n - 1), 3.0, 2.0) * mu_h2
    r = _flat_u1(level, i, j)
    add(r, r, center)
    add(r, _flat_u1(level, i - 1, j), -mu_h2)
    add(r, _flat_u1(level, i + 1, j), -mu_h2)
    mask = j > 0
    add(r[mask], _flat_u1(level, i, j - 1)[mask], -mu_h2)
    mask = j < n - 1
    add(r[mask], _flat_u1(level, i, j + 1)[mask], -mu_h2)
    # Dirichlet identity rows at i = 0, n
    ib, jb = np.meshgrid(np.array([0, n]), np.arange(n), indexing="ij")
    rb = _flat_u1(level, ib, jb)
    add(rb, rb, 1.0)

    # u2 rows, unknowns at j = 1..n-1
    i, j = np.meshgrid(np.arange(n), np.arange(1, n), indexing="ij")
    center = a + 2.0 * mu_h2 + np.where((i == 0) | (i == n - 1), 3.0, 2.0) * mu_h2
    r = _flat_u2(level, i, j)
    add(r, r, center)
    add(r, _flat_u2(level, i, j - 1), -mu_h2)
    add(r, _flat_u2(level, i, j + 1), -mu_h2)
    mask = i > 0
    add(r[mask], _flat_u2(level, i - 1, j)[mask], -mu_h2)
    mask = i < n - 1
    add(r[mask], _flat_u2(level, i + 1, j)[mask], -mu_h2)
    ib, jb = np.meshgrid(np.arange(n), np.array([0, n]), indexing="ij")
    rb = _flat_u2(level, ib, jb)
    add(rb, rb, 1.0)

    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = np.concatenate(vals)
    return sp.csr_matrix((vals, (rows, cols)), shape=(level.n_u, level.n_u))


def assemble_G(level: StaggeredLevel) -> sp.csr_matrix:
    """Sparse gradient, shape (n_u, n_p); zero rows at wall faces."""
    n = level.n
    h = level.h
    rows, cols, vals = [], [], []

    i, j = np.meshgrid(np.arange(1, n), np.arange(n), indexing="ij")
    r = _flat_u1(level, i, j).ravel()
    rows += [r, r]
    cols += [(i * n + j).ravel(), ((i - 1) * n + j).ravel()]
    vals += [np.full(r.size, 1.0 / h), np.full(r.size, -1.0 / h)]

    i, j = np.meshgrid(np.arange(n), np.arange(1, n), indexing="ij")
    r = (_flat_u2(level, i, j)).ravel()
    rows += [r, r]
    cols += [(i * n + j).ravel(), (i * n + (j - 1)).ravel()]
    vals += [np.full(r.size, 1.0 / h), np.full(r.size, -1.0 / h)]

    return sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(level.n_u, level.n_p),
    )


def assemble_D(level: StaggeredLevel) -> sp.csr_matrix:
    """Sparse divergence, shape (n_p, n_u); reads wall-face columns."""
    n = level.n
    h = level.h
    i, j = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    r = (i * n + j).ravel()
    rows = np.concatenate([r, r, r, r])
    cols = np.concatenate(
        [
            _flat_u1(level, i + 1, j).ravel(),
            _flat_u1(level, i, j).ravel(),
            _flat_u2(level, i, j + 1).ravel(),
            _flat_u2(level, i, j).ravel(),
        ]
    )
    vals = np.concatenate(
        [
            np.full(r.size, 1.0 / h),
            np.full(r.size, -1.0 / h),
            np.full(r.size, 1.0 / h),
            np.full(r.size, -1.0 / h),
        ]
    )
    return sp.csr_matrix((vals, (rows, cols)), shape=(level.n_p, level.n_u))
