import numpy as np
import pytest

from ibmg.driver import setup_problem
from ibmg.fibers import make_thin_membrane
from ibmg.grid import BlockVector, build_hierarchy
from ibmg.operators import FluidParams
from ibmg.system import build_systems


@pytest.fixture(scope="session")
def stokes16_hier():
    """Plain Stokes hierarchy (no structure), N = 16."""
    grid = build_hierarchy(16)
    params = FluidParams(rho=0.0, mu=1.0, dt=0.32 / 16)
    return build_systems(grid, params, None)


@pytest.fixture(scope="session")
def thin16_problem():
    """Thin membrane problem at N = 16, rho = 1."""
    return setup_problem([make_thin_membrane(16, 5.0)], 16, mu=1.0, rho=1.0)


@pytest.fixture(scope="session")
def thin16_stokes_problem():
    """Thin membrane problem at N = 16, Stokes flow."""
    return setup_problem([make_thin_membrane(16, 5.0)], 16, mu=1.0, rho=0.0)


def random_block(level, rng, zero_walls=False, zero_mean_p=False) -> BlockVector:
    w = BlockVector(level, rng.standard_normal(level.n_dofs))
    if zero_walls:
        w.u_flat[level.dirichlet_mask_u] = 0.0
    if zero_mean_p:
        w.p -= w.p.mean()
    return w


def consistent_rhs(level, rng) -> BlockVector:
    """Random right-hand side in the homogeneous, mean-free subspace."""
    b = random_block(level, rng, zero_walls=True, zero_mean_p=True)
    return b
