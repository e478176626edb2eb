"""Outer Krylov solve and the single semi-implicit time step.

One time step freezes the coupling operators at the current structure
configuration, eliminates the new node positions from the block system, and
solves the reduced saddle-point system for (u, p) with flexible GMRES
preconditioned by one V-cycle per iteration.  The node positions are then
recovered from the interpolated velocity.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .coupling import CouplingOperators
from .fibers import FiberMesh, apply_K_multi, concat_positions
from .grid import BlockVector, GridHierarchy, build_hierarchy
from .krylov import fgmres
from .multigrid import VCycle
from .operators import CavityBC, FluidParams, build_rhs
from .smoothers import Smoother, SmootherConfig
from .system import SystemHierarchy, apply_LIB, build_systems

CFL_DT_FACTOR = 0.32  # dt = 0.32 * h on the finest level
DEFAULT_TOL = 1e-12
DEFAULT_MAX_ITERS = 100


@dataclass
class SolveReport:
    iterations: int
    residual_history: list[float]
    converged: bool
    wall_time: float
    config: dict = field(default_factory=dict)


def solve(
    hier: SystemHierarchy,
    smoother: Smoother,
    b: BlockVector,
    tol: float = DEFAULT_TOL,
    max_iters: int = DEFAULT_MAX_ITERS,
    nu1: int = 1,
    nu2: int = 1,
    config: dict | None = None,
    vcycle: VCycle | None = None,
) -> tuple[BlockVector, SolveReport]:
    """FGMRES on the finest level, preconditioned by one V-cycle per step."""
    sys = hier.finest
    lv = sys.level
    b = b.copy()
    b.p -= b.p.mean()
    cycle = vcycle if vcycle is not None else VCycle(hier, smoother, nu1, nu2)

    def op(v: np.ndarray) -> np.ndarray:
        return apply_LIB(sys, BlockVector(lv, v)).data

    def prec(v: np.ndarray) -> np.ndarray:
        return cycle.apply(BlockVector(lv), BlockVector(lv, v)).data

    t0 = time.perf_counter()
    x, info = fgmres(
        op, prec, b.data, tol=tol, max_iters=max_iters, weight=lv.h * lv.h
    )
    wall = time.perf_counter() - t0
    w = BlockVector(lv, x)
    w.p -= w.p.mean()
    report = SolveReport(
        iterations=info.iterations,
        residual_history=info.residuals,
        converged=info.converged and not info.breakdown,
        wall_time=wall,
        config=dict(config or {}),
    )
    return w, report


@dataclass
class StepState:
    """Velocity field and node positions entering a time step."""

    u: BlockVector
    positions: np.ndarray  # (n_nodes, 2), concatenated across meshes


@dataclass
class StepResult:
    u: BlockVector
    p: np.ndarray
    positions: np.ndarray
    report: SolveReport


@dataclass
class Problem:
    """Everything fixed across solver configurations for one test problem."""

    grid: GridHierarchy
    hier: SystemHierarchy
    params: FluidParams
    bc: CavityBC
    meshes: list[FiberMesh]

    @property
    def coupling(self) -> CouplingOperators:
        return self.hier.coupling

    def initial_state(self) -> StepState:
        return StepState(
            u=BlockVector(self.grid.finest),
            positions=concat_positions(self.meshes),
        )


def setup_problem(
    meshes: list[FiberMesh] | FiberMesh,
    finest_n: int,
    mu: float,
    rho: float,
    bc: CavityBC | None = None,
) -> Problem:
    """Build grid, params (dt = 0.32 h) and the system hierarchy."""
    if isinstance(meshes, FiberMesh):
        meshes = [meshes]
    grid = build_hierarchy(finest_n)
    dt = CFL_DT_FACTOR * grid.finest.h
    params = FluidParams(rho=rho, mu=mu, dt=dt)
    hier = build_systems(grid, params, meshes)
    return Problem(
        grid=grid,
        hier=hier,
        params=params,
        bc=bc if bc is not None else CavityBC(),
        meshes=meshes,
    )


def semi_implicit_step(
    problem: Problem,
    state: StepState,
    smoother_cfg: SmootherConfig,
    tol: float = DEFAULT_TOL,
    max_iters: int = DEFAULT_MAX_ITERS,
    nu1: int = 1,
    nu2: int = 1,
    smoother: Smoother | None = None,
    vcycle: VCycle | None = None,
) -> StepResult:
    """Advance (u, X) by one step of the lagged semi-implicit scheme.

    Assembles b = (spread(K X) + (rho/dt) u + boundary lift, 0), solves the
    reduced system for (u, p), then recovers the new positions
    X + dt * J u.  Non-convergence is reported, not raised.
    """
    params = problem.params
    ops = problem.coupling
    force = apply_K_multi(problem.meshes, state.positions)
    f1, f2 = ops.spread(force)
    if params.rho != 0.0:
        f1 = f1 + (params.rho / params.dt) * state.u.u1
        f2 = f2 + (params.rho / params.dt) * state.u.u2
    b = build_rhs(params, problem.bc, (f1, f2), problem.grid.finest)

    if smoother is None:
        smoother = Smoother(problem.hier, smoother_cfg)
    config = {
        "N": problem.grid.finest_n,
        "mu": params.mu,
        "rho": params.rho,
        "smoother": smoother_cfg.kind,
        "box": smoother_cfg.box_size,
        "overlap": smoother_cfg.overlap,
        "nu1": nu1,
        "nu2": nu2,
        "wrap": smoother_cfg.fgmres_iters,
    }
    w, report = solve(
        problem.hier,
        smoother,
        b,
        tol=tol,
        max_iters=max_iters,
        nu1=nu1,
        nu2=nu2,
        config=config,
        vcycle=vcycle,
    )
    velocity = ops.interpolate(w.u1, w.u2)
    new_positions = state.positions + params.dt * velocity
    return StepResult(u=w, p=w.p.copy(), positions=new_positions, report=report)
