"""Geometric multigrid solver for semi-implicit immersed-boundary Stokes flow.

The package couples a staggered-grid Stokes discretization of lid-driven
cavity flow to elastic fiber structures through regularized-delta spreading
and interpolation, eliminates the Lagrangian unknowns from the semi-implicit
time step, and solves the resulting saddle-point system with FGMRES
preconditioned by a V-cycle built on Schwarz or Schur-complement smoothing.
"""

from .coupling import CouplingOperators, phi
from .driver import (
    Problem,
    SolveReport,
    StepState,
    semi_implicit_step,
    setup_problem,
    solve,
)
from .fibers import (
    FiberMesh,
    StiffnessSpec,
    apply_K,
    assemble_K_matrix,
    make_suspension,
    make_thick_annulus,
    make_thin_membrane,
)
from .grid import (
    BlockVector,
    GridHierarchy,
    StaggeredLevel,
    axpy,
    block_inner_product,
    build_hierarchy,
    copy_into,
    scale,
)
from .multigrid import VCycle, coarse_solve, v_cycle
from .operators import CavityBC, FluidParams, apply_A, apply_D, apply_G, build_rhs
from .smoothers import (
    SCSmootherConfig,
    Smoother,
    SmootherConfig,
    partition_level,
    ras_apply,
    rms_apply,
    sc_apply,
    smooth,
)
from .system import (
    StokesIBLevelSystem,
    SystemHierarchy,
    apply_LIB,
    build_systems,
    residual,
)
from .transfer import (
    prolong_pressure,
    prolong_velocity,
    restrict_pressure,
    restrict_velocity,
)

__version__ = "0.1.0"
