"""Smoothing engines for the Stokes-IB hierarchy.

Three interchangeable inner smoothers:

* restricted additive Schwarz (RAS): independent overlapping-box solves whose
  updates are written only on a non-overlapping restricted set;
* restricted multiplicative Schwarz (RMS): identical geometry, but the
  residual is refreshed before every box solve (sequential by definition);
* an approximate block factorization (SC) built from Chebyshev-accelerated
  Gauss-Seidel solves for the momentum block and for the pressure Schur
  complement.

None of these is guaranteed to damp every high-frequency mode on its own, so
each smoothing application wraps the inner method in a small, fixed number of
flexible GMRES steps, which provides residual-minimizing damping without a
tunable damping parameter.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .grid import BlockVector
from .krylov import fgmres
from .operators import apply_D, apply_G
from .relax import CSRRelaxation, chebyshev, power_estimate
from .system import (
    StokesIBLevelSystem,
    SystemHierarchy,
    apply_LIB,
    assemble_LIB,
    residual,
)

SINGULAR_SHIFT = 1e-12  # relative pressure-diagonal shift for singular boxes


def smoother_threads() -> int:
    """Worker count for the additive smoother, capped by IBMG_THREADS."""
    try:
        return max(1, int(os.environ.get("IBMG_THREADS", "1")))
    except ValueError:
        return 1


# ---------------------------------------------------------------------------
# Subdomain partitions


@dataclass
class Subdomain:
    indices: np.ndarray  # overlapping DOF set G_i (sorted, unknowns only)
    restricted: np.ndarray  # non-overlapping update set, subset of indices
    local_restricted: np.ndarray  # positions of `restricted` within `indices`
    solver: spla.SuperLU
    update_cols: sp.csr_matrix  # columns of L at `restricted`, for RMS updates


@dataclass
class SubdomainPartition:
    level_index: int
    box_size: int
    overlap: int
    subdomains: list[Subdomain]


def _box_dof_sets(sys: StokesIBLevelSystem, box: int, overlap: int):
    """Yield (G_i, Gtilde_i) flat index sets in lexicographic box order."""
    lv = sys.level
    n = lv.n
    nb = n // box
    off_u2 = lv.n_u1
    off_p = lv.n_u

    def u1_ids(i_lo, i_hi, j_lo, j_hi):
        i = np.arange(i_lo, i_hi + 1)
        j = np.arange(j_lo, j_hi + 1)
        return (i[:, None] * n + j[None, :]).ravel()

    def u2_ids(i_lo, i_hi, j_lo, j_hi):
        i = np.arange(i_lo, i_hi + 1)
        j = np.arange(j_lo, j_hi + 1)
        return off_u2 + (i[:, None] * (n + 1) + j[None, :]).ravel()

    def p_ids(i_lo, i_hi, j_lo, j_hi):
        i = np.arange(i_lo, i_hi + 1)
        j = np.arange(j_lo, j_hi + 1)
        return off_p + (i[:, None] * n + j[None, :]).ravel()

    for by in range(nb):
        for bx in range(nb):
            cx0, cx1 = max(0, bx * box - overlap), min(n, (bx + 1) * box + overlap)
            cy0, cy1 = max(0, by * box - overlap), min(n, (by + 1) * box + overlap)
            # faces on the closed overlapped box, excluding wall faces
            g = np.concatenate(
                [
                    u1_ids(max(cx0, 1), min(cx1, n - 1), cy0, cy1 - 1),
                    u2_ids(cx0, cx1 - 1, max(cy0, 1), min(cy1, n - 1)),
                    p_ids(cx0, cx1 - 1, cy0, cy1 - 1),
                ]
            )
            # ownership: seam faces go to the lower-indexed box
            gt = np.concatenate(
                [
                    u1_ids(bx * box + 1, min((bx + 1) * box, n - 1), by * box, (by + 1) * box - 1),
                    u2_ids(bx * box, (bx + 1) * box - 1, by * box + 1, min((by + 1) * box, n - 1)),
                    p_ids(bx * box, (bx + 1) * box - 1, by * box, (by + 1) * box - 1),
                ]
            )
            yield np.sort(g), np.sort(gt)


def partition_level(
    sys: StokesIBLevelSystem,
    box_size: int | None,
    overlap: int,
    lib_matrix: sp.csr_matrix | None = None,
) -> SubdomainPartition:
    """Tile the level into overlapping boxes and factor each subdomain block.

    ``box_size = None`` uses a single whole-domain subdomain.  A box covering
    the entire level has a constant-pressure null mode; its pressure diagonal
    receives a tiny relative shift before factoring.
    """
    lv = sys.level
    box = lv.n if box_size is None else int(box_size)
    if lv.n % box != 0:
        raise ValueError(f"box size {box} does not divide n = {lv.n}")
    if overlap < 0:
        raise ValueError("overlap must be nonnegative")
    lib = assemble_LIB(sys) if lib_matrix is None else lib_matrix
    lib_csc = lib.tocsc()
    n_unknowns = len(lv.unknown_indices)
    subdomains = []
    for g, gt in _box_dof_sets(sys, box, overlap):
        local = np.searchsorted(g, gt)
        block = lib_csc[:, g].tocsr()[g, :].tocsc()
        if len(g) == n_unknowns:
            # a box spanning the whole level has a constant-pressure null
            # mode; shift its pressure diagonal below smoothing accuracy
            shift = SINGULAR_SHIFT * np.max(np.abs(block.data))
            shift_vec = np.where(g >= lv.n_u, shift, 0.0)
            block = (block + sp.diags(shift_vec)).tocsc()
        solver = spla.splu(block)
        cols = lib_csc[:, gt].tocsr()
        subdomains.append(
            Subdomain(
                indices=g,
                restricted=gt,
                local_restricted=local,
                solver=solver,
                update_cols=cols,
            )
        )
    part = SubdomainPartition(
        level_index=lv.index, box_size=box, overlap=overlap, subdomains=subdomains
    )
    _check_partition_cover(lv, part)
    return part


def _check_partition_cover(level, part: SubdomainPartition) -> None:
    seen = np.concatenate([s.restricted for s in part.subdomains])
    if len(seen) != len(np.unique(seen)):
        raise AssertionError("restricted index sets overlap")
    if not np.array_equal(np.sort(seen), level.unknown_indices):
        raise AssertionError("restricted index sets do not cover the unknowns")


def ras_apply(
    part: SubdomainPartition,
    sys: StokesIBLevelSystem,
    w: BlockVector,
    b: BlockVector,
) -> BlockVector:
    """One restricted additive Schwarz sweep.

    All subdomain right-hand sides come from the residual of the incoming
    iterate, so the solves are independent; each writes only its own
    restricted set and the result does not depend on processing order.
    """
    r = residual(sys, w, b).data
    out = w.copy()

    def solve_one(sub: Subdomain) -> np.ndarray:
        return sub.solver.solve(r[sub.indices])[sub.local_restricted]

    nthreads = smoother_threads()
    subs = part.subdomains
    if nthreads > 1 and len(subs) > 1:
        with ThreadPoolExecutor(max_workers=nthreads) as pool:
            updates = list(pool.map(solve_one, subs))
    else:
        updates = [solve_one(s) for s in subs]
    for sub, du in zip(subs, updates):
        out.data[sub.restricted] += du
    return out


def rms_apply(
    part: SubdomainPartition,
    sys: StokesIBLevelSystem,
    w: BlockVector,
    b: BlockVector,
) -> BlockVector:
    """One restricted multiplicative Schwarz sweep.

    Identical to RAS except that every box solve sees the residual of the
    most recent iterate.  The residual is maintained incrementally: after a
    box update du, r decreases by (columns of L at the updated DOFs) @ du,
    which touches only the stencil halo of the box.
    """
    r = residual(sys, w, b).data
    out = w.copy()
    for sub in part.subdomains:
        du = sub.solver.solve(r[sub.indices])[sub.local_restricted]
        out.data[sub.restricted] += du
        r -= sub.update_cols @ du
    return out


# ---------------------------------------------------------------------------
# Schur-complement smoother


@dataclass(frozen=True)
class SCSmootherConfig:
    cheby_iters_A: int = 2
    cheby_iters_M: int = 2
    gs_sweeps: int = 1
    power_iters: int = 10
    safety: float = 1.1
    lower_fraction: float = 0.1

    def __post_init__(self):
        if self.cheby_iters_A < 1 or self.cheby_iters_M < 1:
            raise ValueError("Chebyshev iteration counts must be >= 1")
        if self.gs_sweeps != 1:
            raise ValueError("one Gauss-Seidel sweep per Chebyshev step is supported")


class SCLevelData:
    """Cached operators and spectral bounds for sc_apply on one level."""

    def __init__(self, sys: StokesIBLevelSystem, cfg: SCSmootherConfig,
                 lib_matrix: sp.csr_matrix | None = None):
        lv = sys.level
        self.sys = sys
        self.cfg = cfg
        lib = assemble_LIB(sys) if lib_matrix is None else lib_matrix
        self.a_ib = lib[: lv.n_u, : lv.n_u].tocsr()
        self.relax_a = CSRRelaxation(self.a_ib)
        diag_inv = sp.diags(1.0 / self.a_ib.diagonal())
        g = lib[: lv.n_u, lv.n_u :].tocsr()
        d = (-lib[lv.n_u :, : lv.n_u]).tocsr()
        # -M_hat = -D diag(A_IB)^{-1} G is an (SPD-like) Poisson operator
        self.mhat_neg = (-(d @ diag_inv @ g)).tocsr()
        self.relax_m = CSRRelaxation(self.mhat_neg)
        lam_a = power_estimate(
            lambda x: self.relax_a.sgs_solve(self.a_ib @ x),
            lv.n_u,
            iters=cfg.power_iters,
        )
        self.bounds_a = (cfg.lower_fraction * lam_a, cfg.safety * lam_a)
        lam_m = power_estimate(
            lambda x: self.relax_m.sgs_solve(self._neg_schur_op(x)),
            lv.n_p,
            iters=cfg.power_iters,
        )
        self.bounds_m = (cfg.lower_fraction * lam_m, cfg.safety * lam_m)

    def solve_a(self, rhs_u: np.ndarray) -> np.ndarray:
        """Approximate A_IB^{-1}: Chebyshev preconditioned by symmetric GS."""
        return chebyshev(
            lambda x: self.a_ib @ x,
            self.relax_a.sgs_solve,
            rhs_u,
            self.cfg.cheby_iters_A,
            *self.bounds_a,
        )

    def _neg_schur_op(self, x_p: np.ndarray) -> np.ndarray:
        lv = self.sys.level
        g1, g2 = apply_G(x_p.reshape(lv.shape_p), lv)
        gu = np.concatenate([g1.ravel(), g2.ravel()])
        au = self.solve_a(gu)
        return -apply_D(
            au[: lv.n_u1].reshape(lv.shape_u1),
            au[lv.n_u1 :].reshape(lv.shape_u2),
            lv,
        ).ravel()

    def solve_m(self, rhs_p: np.ndarray) -> np.ndarray:
        """Approximate inverse of the (negative-definite) Schur complement."""
        return chebyshev(
            self._neg_schur_op,
            self.relax_m.sgs_solve,
            -rhs_p,
            self.cfg.cheby_iters_M,
            *self.bounds_m,
        )


def sc_apply(
    sys: StokesIBLevelSystem,
    data: SCLevelData,
    w: BlockVector,
    b: BlockVector,
    solve_a=None,
    solve_m=None,
) -> BlockVector:
    """One application of the approximate block-factorization smoother.

    Applies the triangular-diagonal-triangular factorization of the block
    inverse to the residual and adds the correction.  ``solve_a``/``solve_m``
    default to the cached Chebyshev/Gauss-Seidel recipes; tests may inject
    exact inverses, for which the factorization is exact.
    """
    solve_a = solve_a or data.solve_a
    solve_m = solve_m or data.solve_m
    lv = sys.level
    r = residual(sys, w, b)
    r_u = r.u_flat.copy()
    r_p = r.p.ravel().copy()

    z = solve_a(r_u)  # shared by the lower factor and the middle block
    q = r_p + apply_D(
        z[: lv.n_u1].reshape(lv.shape_u1), z[lv.n_u1 :].reshape(lv.shape_u2), lv
    ).ravel()
    y_p = solve_m(q)
    g1, g2 = apply_G(y_p.reshape(lv.shape_p), lv)
    y_u = z - solve_a(np.concatenate([g1.ravel(), g2.ravel()]))

    out = w.copy()
    out.u_flat[:] += y_u
    out.data[lv.n_u :] += y_p
    return out


# ---------------------------------------------------------------------------
# Smoother objects and the FGMRES wrap


@dataclass(frozen=True)
class SmootherConfig:
    """Selects the inner algorithm and its knobs."""

    kind: str = "sc"  # ras | rms | sc
    box_size: int | None = 8
    overlap: int = 2
    fgmres_iters: int = 2
    sc: SCSmootherConfig = field(default_factory=SCSmootherConfig)

    def __post_init__(self):
        if self.kind not in ("ras", "rms", "sc"):
            raise ValueError(f"unknown smoother kind {self.kind!r}")
        if self.fgmres_iters < 0:
            raise ValueError("fgmres_iters must be >= 0")


class Smoother:
    """Per-hierarchy smoother state; ``apply`` runs one inner application.

    ``share`` reuses the assembled level matrices (and, when the subdomain
    geometry matches, the factored partitions) of another smoother on the
    same hierarchy, so RAS/RMS variants of one configuration set up once.
    """

    def __init__(
        self,
        hier: SystemHierarchy,
        cfg: SmootherConfig,
        share: "Smoother | None" = None,
    ):
        self.hier = hier
        self.cfg = cfg
        self.lib_matrices: dict[int, sp.csr_matrix] = {}
        self.partitions: dict[int, SubdomainPartition] = {}
        self.sc_data: dict[int, SCLevelData] = {}
        if share is not None and share.hier is not hier:
            raise ValueError("can only share caches within one hierarchy")
        same_geometry = (
            share is not None
            and share.cfg.kind in ("ras", "rms")
            and cfg.kind in ("ras", "rms")
            and share.cfg.box_size == cfg.box_size
            and share.cfg.overlap == cfg.overlap
        )
        # the coarsest level is solved directly, never smoothed
        for sys in hier.systems[1:] if hier.n_levels > 1 else hier.systems:
            idx = sys.level.index
            if share is not None and idx in share.lib_matrices:
                lib = share.lib_matrices[idx]
            else:
                lib = assemble_LIB(sys)
            self.lib_matrices[idx] = lib
            if cfg.kind in ("ras", "rms"):
                if same_geometry and idx in share.partitions:
                    self.partitions[idx] = share.partitions[idx]
                else:
                    self.partitions[idx] = partition_level(
                        sys, cfg.box_size, cfg.overlap, lib_matrix=lib
                    )
            else:
                if share is not None and share.cfg.sc == cfg.sc and idx in share.sc_data:
                    self.sc_data[idx] = share.sc_data[idx]
                else:
                    self.sc_data[idx] = SCLevelData(sys, cfg.sc, lib_matrix=lib)

    def apply(self, level_index: int, w: BlockVector, b: BlockVector) -> BlockVector:
        sys = self.hier.systems[level_index]
        if self.cfg.kind == "ras":
            return ras_apply(self.partitions[level_index], sys, w, b)
        if self.cfg.kind == "rms":
            return rms_apply(self.partitions[level_index], sys, w, b)
        return sc_apply(sys, self.sc_data[level_index], w, b)


def smooth(
    smoother: Smoother,
    level_index: int,
    w: BlockVector,
    b: BlockVector,
    nu: int,
) -> BlockVector:
    """Run ``nu`` wrapped smoothing applications, warm-started from w.

    Each application takes ``fgmres_iters`` flexible GMRES steps on the
    residual equation, right-preconditioned by one inner application; the
    wrap never increases the residual norm.  ``fgmres_iters = 0`` degrades
    to the bare inner sweep (used by linearity tests).
    """
    if nu < 1:
        raise ValueError("sweep count nu must be >= 1")
    sys = smoother.hier.systems[level_index]
    lv = sys.level
    m = smoother.cfg.fgmres_iters
    for _ in range(nu):
        if m == 0:
            w = smoother.apply(level_index, w, b)
            continue
        r = residual(sys, w, b)
        zero = BlockVector(lv)

        def prec(v: np.ndarray) -> np.ndarray:
            return smoother.apply(level_index, zero, BlockVector(lv, v)).data

        z, _info = fgmres(
            lambda v: apply_LIB(sys, BlockVector(lv, v)).data,
            prec,
            r.data,
            tol=0.0,
            max_iters=m,
            weight=lv.h * lv.h,
        )
        w = BlockVector(lv, w.data + z)
    return w
