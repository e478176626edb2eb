"""Per-level Stokes-IB operators and their multigrid hierarchy.

On every level the block operator maps (u, p) to

    ( A u - dt * E u + G p ,  -D u )

where E = S K J is the Eulerian elasticity matrix.  E is assembled on the
finest level from the cached coupling stencils and carried to coarser levels
by the Galerkin triple product R_u E P_u, which preserves its symmetry; A, G
and D are rediscretized with the level spacing.  Wall faces are identity rows
on every level.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .coupling import CouplingOperators
from .fibers import FiberMesh, assemble_K_scalar_multi
from .grid import BlockVector, GridHierarchy, StaggeredLevel
from .operators import (
    FluidParams,
    apply_A,
    apply_D,
    apply_G,
    assemble_A,
    assemble_D,
    assemble_G,
)
from .transfer import build_P_u, build_R_u


@dataclass
class StokesIBLevelSystem:
    """One level's operator blocks; ``elasticity`` is S K J (no dt factor)."""

    level: StaggeredLevel
    params: FluidParams
    elasticity: sp.csr_matrix | None = None

    def __post_init__(self):
        if self.elasticity is not None:
            if self.elasticity.shape != (self.level.n_u, self.level.n_u):
                raise ValueError("elasticity matrix shape mismatch")

    @property
    def dt(self) -> float:
        return self.params.dt


def apply_LIB(sys: StokesIBLevelSystem, w: BlockVector) -> BlockVector:
    """Matrix-free application of the Stokes-IB block operator."""
    if w.level != sys.level:
        raise ValueError("block vector level mismatch")
    lv = sys.level
    out = BlockVector(lv)
    a1, a2 = apply_A(sys.params, w.u1, w.u2, lv)
    g1, g2 = apply_G(w.p, lv)
    out.u1[:] = a1 + g1
    out.u2[:] = a2 + g2
    if sys.elasticity is not None:
        out.u_flat[:] -= sys.dt * (sys.elasticity @ w.u_flat)
        mask = lv.dirichlet_mask_u
        out.u_flat[mask] = w.u_flat[mask]
    out.p[:] = -apply_D(w.u1, w.u2, lv)
    return out


def residual(
    sys: StokesIBLevelSystem, w: BlockVector, b: BlockVector
) -> BlockVector:
    """r = b - L_IB w."""
    r = apply_LIB(sys, w)
    r.data *= -1.0
    r.data += b.data
    return r


def assemble_LIB(sys: StokesIBLevelSystem) -> sp.csr_matrix:
    """Sparse matrix equal to apply_LIB on the full flat DOF space."""
    lv = sys.level
    a = assemble_A(sys.params, lv)
    if sys.elasticity is not None:
        unk = sp.diags((~lv.dirichlet_mask_u).astype(float))
        a = (a - sys.dt * (unk @ sys.elasticity)).tocsr()
    g = assemble_G(lv)
    d = assemble_D(lv)
    return sp.bmat([[a, g], [-d, None]], format="csr")


@dataclass
class SystemHierarchy:
    """Level systems (coarse to fine) plus the transfers that built them."""

    grid: GridHierarchy
    systems: list[StokesIBLevelSystem]
    prolongations: list[sp.csr_matrix]  # P_u from level ell to ell+1
    restrictions: list[sp.csr_matrix]  # R_u from level ell+1 to ell
    coupling: CouplingOperators | None = None
    meshes: list[FiberMesh] | None = None

    @property
    def n_levels(self) -> int:
        return len(self.systems)

    @property
    def finest(self) -> StokesIBLevelSystem:
        return self.systems[-1]


def build_systems(
    grid: GridHierarchy,
    params: FluidParams,
    meshes: list[FiberMesh] | FiberMesh | None = None,
) -> SystemHierarchy:
    """Build every level's system; Galerkin-coarsen the elasticity matrix."""
    if isinstance(meshes, FiberMesh):
        meshes = [meshes]
    prolongations = [
        build_P_u(grid.levels[ell], grid.levels[ell + 1])
        for ell in range(grid.n_levels - 1)
    ]
    restrictions = [(0.25 * p.T).tocsr() for p in prolongations]

    coupling = None
    e_levels: list[sp.csr_matrix | None] = [None] * grid.n_levels
    if meshes:
        coupling = CouplingOperators(grid.finest, meshes)
        k_scalar = assemble_K_scalar_multi(meshes)
        e = coupling.assemble_skj(k_scalar)
        e_levels[-1] = e
        for ell in range(grid.n_levels - 2, -1, -1):
            e = (restrictions[ell] @ e @ prolongations[ell]).tocsr()
            e_levels[ell] = e

    systems = [
        StokesIBLevelSystem(level=lv, params=params, elasticity=e_levels[lv.index])
        for lv in grid.levels
    ]
    return SystemHierarchy(
        grid=grid,
        systems=systems,
        prolongations=prolongations,
        restrictions=restrictions,
        coupling=coupling,
        meshes=meshes if meshes else None,
    )


def project_pressure_mean(w: BlockVector) -> BlockVector:
    """Remove the constant pressure mode in place; returns w."""
    w.p -= w.p.mean()
    return w


def zero_dirichlet_faces(w: BlockVector) -> BlockVector:
    """Zero the wall-face velocity entries in place; returns w."""
    w.u_flat[w.level.dirichlet_mask_u] = 0.0
    return w
