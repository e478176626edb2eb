"""Recursive V-cycle over the system hierarchy with a direct coarsest solve.

The coarsest (8x8) level is solved by a dense LU of the operator restricted
to the unknown DOFs.  On that subspace the saddle system is symmetric with a
one-dimensional constant-pressure null space; the factorization adds a rank-
one term c*q*q^T along the unit null vector q, which leaves the solve exact
for right-hand sides with mean-free pressure while making the matrix regular.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg as la

from .grid import BlockVector
from .smoothers import Smoother, smooth
from .system import (
    StokesIBLevelSystem,
    SystemHierarchy,
    assemble_LIB,
    residual,
    zero_dirichlet_faces,
)
from .transfer import (
    prolong_pressure,
    prolong_velocity,
    restrict_pressure,
    restrict_velocity,
)


class CoarseSolver:
    """Factored direct solve of one level on its unknown subspace."""

    def __init__(self, sys: StokesIBLevelSystem):
        lv = sys.level
        self.sys = sys
        self.unknowns = lv.unknown_indices
        mat = assemble_LIB(sys).toarray()[np.ix_(self.unknowns, self.unknowns)]
        n_unk = len(self.unknowns)
        q = np.zeros(n_unk)
        q[self.unknowns >= lv.n_u] = 1.0
        q /= np.linalg.norm(q)
        self.null_vec = q
        c = np.max(np.abs(np.diag(mat)))
        self.lu = la.lu_factor(mat + c * np.outer(q, q))

    def solve(self, b: BlockVector) -> BlockVector:
        lv = self.sys.level
        rhs = b.data[self.unknowns].copy()
        rhs -= (self.null_vec @ rhs) * self.null_vec
        x = la.lu_solve(self.lu, rhs)
        x -= (self.null_vec @ x) * self.null_vec
        out = BlockVector(lv)
        out.data[self.unknowns] = x
        return out


def coarse_solve(sys: StokesIBLevelSystem, b: BlockVector) -> BlockVector:
    """One-shot direct solve (tests); production caches a CoarseSolver."""
    return CoarseSolver(sys).solve(b)


class VCycle:
    """Reusable V-cycle preconditioner with a cached coarse factorization."""

    def __init__(
        self,
        hier: SystemHierarchy,
        smoother: Smoother,
        nu1: int = 1,
        nu2: int = 1,
    ):
        if nu1 < 0 or nu2 < 0 or nu1 + nu2 < 1:
            raise ValueError("need nu1, nu2 >= 0 with nu1 + nu2 >= 1")
        self.hier = hier
        self.smoother = smoother
        self.nu1 = nu1
        self.nu2 = nu2
        self.coarse = CoarseSolver(hier.systems[0])

    def apply(self, w: BlockVector, b: BlockVector, level_index: int | None = None) -> BlockVector:
        ell = self.hier.n_levels - 1 if level_index is None else level_index
        sys = self.hier.systems[ell]
        if ell == 0:
            return self.coarse.solve(b)
        if self.nu1 > 0:
            w = smooth(self.smoother, ell, w, b, self.nu1)
        r = residual(sys, w, b)
        coarse_sys = self.hier.systems[ell - 1]
        rc = BlockVector(coarse_sys.level)
        r1c, r2c = restrict_velocity(r.u1, r.u2, coarse_sys.level)
        rc.u1[:] = r1c
        rc.u2[:] = r2c
        rc.p[:] = restrict_pressure(r.p, coarse_sys.level)
        zero_dirichlet_faces(rc)
        rc.p -= rc.p.mean()
        ec = self.apply(BlockVector(coarse_sys.level), rc, ell - 1)
        e1, e2 = prolong_velocity(ec.u1, ec.u2, sys.level)
        w = w.copy()
        w.u1[:] += e1
        w.u2[:] += e2
        w.p[:] += prolong_pressure(ec.p, sys.level)
        if self.nu2 > 0:
            w = smooth(self.smoother, ell, w, b, self.nu2)
        return w


def v_cycle(
    hier: SystemHierarchy,
    smoother: Smoother,
    w: BlockVector,
    b: BlockVector,
    nu1: int = 1,
    nu2: int = 1,
) -> BlockVector:
    """One V-cycle on the finest level (convenience wrapper around VCycle)."""
    return VCycle(hier, smoother, nu1, nu2).apply(w, b)
