import numpy as np
import pytest
import scipy.sparse as sp

from ibmg import oracle
from ibmg.fibers import make_thin_membrane
from ibmg.grid import BlockVector, build_hierarchy
from ibmg.operators import FluidParams, apply_A, apply_D, apply_G
from ibmg.system import (
    StokesIBLevelSystem,
    apply_LIB,
    assemble_LIB,
    build_systems,
    residual,
)
from conftest import random_block


class TestApplyLIB:
    def test_zero_maps_to_zero(self, thin16_problem):
        sys_f = thin16_problem.hier.finest
        out = apply_LIB(sys_f, BlockVector(sys_f.level))
        assert np.abs(out.data).max() == 0.0

    def test_plain_stokes_reduces_to_block_composition(self, stokes16_hier):
        sys_f = stokes16_hier.finest
        lv = sys_f.level
        rng = np.random.default_rng(0)
        w = random_block(lv, rng)
        out = apply_LIB(sys_f, w)
        a1, a2 = apply_A(sys_f.params, w.u1, w.u2, lv)
        g1, g2 = apply_G(w.p, lv)
        assert np.allclose(out.u1, a1 + g1, rtol=1e-14)
        assert np.allclose(out.u2, a2 + g2, rtol=1e-14)
        assert np.allclose(out.p, -apply_D(w.u1, w.u2, lv), rtol=1e-14)

    def test_matches_dense_oracle(self, thin16_problem):
        sys_f = thin16_problem.hier.finest
        lv = sys_f.level
        dense = oracle.dense_assemble_LIB(
            sys_f.params, lv, thin16_problem.meshes
        )
        rng = np.random.default_rng(1)
        for _ in range(3):
            w = random_block(lv, rng)
            ref = dense @ w.data
            out = apply_LIB(sys_f, w)
            assert np.abs(out.data - ref).max() <= 1e-12 * np.abs(ref).max()

    def test_assembled_matches_matrix_free(self, thin16_problem):
        sys_f = thin16_problem.hier.finest
        lv = sys_f.level
        lib = assemble_LIB(sys_f)
        rng = np.random.default_rng(2)
        w = random_block(lv, rng)
        out = apply_LIB(sys_f, w)
        assert np.abs(lib @ w.data - out.data).max() <= 1e-12 * np.abs(out.data).max()

    def test_level_mismatch(self, thin16_problem):
        sys_f = thin16_problem.hier.finest
        other = build_hierarchy(8).finest
        with pytest.raises(ValueError):
            apply_LIB(sys_f, BlockVector(other))


class TestResidual:
    def test_zero_iterate_returns_rhs(self, thin16_problem):
        sys_f = thin16_problem.hier.finest
        rng = np.random.default_rng(3)
        b = random_block(sys_f.level, rng)
        r = residual(sys_f, BlockVector(sys_f.level), b)
        assert np.array_equal(r.data, b.data)

    def test_affine_in_iterate(self, thin16_problem):
        sys_f = thin16_problem.hier.finest
        lv = sys_f.level
        rng = np.random.default_rng(4)
        b = random_block(lv, rng)
        w1 = random_block(lv, rng)
        w2 = random_block(lv, rng)
        lhs = residual(sys_f, BlockVector(lv, w1.data + w2.data), b)
        rhs = residual(sys_f, w1, b).data - apply_LIB(sys_f, w2).data
        assert np.allclose(lhs.data, rhs, rtol=1e-12, atol=1e-9)

    def test_dense_solution_has_tiny_residual(self, thin16_problem):
        sys_f = thin16_problem.hier.finest
        lv = sys_f.level
        rng = np.random.default_rng(5)
        b = random_block(lv, rng, zero_walls=True, zero_mean_p=True)
        dense = oracle.dense_assemble_LIB(sys_f.params, lv, thin16_problem.meshes)
        x = oracle.dense_solve(dense, b.data)
        r = residual(sys_f, BlockVector(lv, x), b)
        hnorm = np.linalg.norm
        assert hnorm(r.data) < 1e-10 * hnorm(b.data)


class TestHierarchy:
    def test_elasticity_symmetric_on_every_level(self, thin16_problem):
        for s in thin16_problem.hier.systems:
            e = s.elasticity
            assert abs(e - e.T).max() <= 1e-12 * max(abs(e).max(), 1e-300)

    def test_zero_stiffness_stays_zero(self):
        grid = build_hierarchy(16)
        params = FluidParams(rho=0.0, mu=1.0, dt=0.02)
        hier = build_systems(grid, params, [make_thin_membrane(16, 0.0)])
        for s in hier.systems:
            assert abs(s.elasticity).max() == 0.0

    def test_galerkin_triple_product_matches_dense(self):
        grid = build_hierarchy(32)
        params = FluidParams(rho=0.0, mu=1.0, dt=0.01)
        hier = build_systems(grid, params, [make_thin_membrane(32, 2.0)])
        e_fine = hier.systems[-1].elasticity.toarray()
        p = hier.prolongations[-1].toarray()
        ref = 0.25 * p.T @ e_fine @ p
        got = hier.systems[-2].elasticity.toarray()
        assert np.abs(got - ref).max() <= 1e-13 * np.abs(ref).max()

    def test_elasticity_contribution_is_psd(self, thin16_problem):
        rng = np.random.default_rng(6)
        for s in thin16_problem.hier.systems:
            e = s.elasticity
            for _ in range(3):
                u = rng.standard_normal(e.shape[0])
                q = u @ (e @ u) * (-s.dt)
                assert q >= -1e-10 * (u @ u) * max(abs(e).max() * s.dt, 1.0)

    def test_plain_hierarchy_has_no_elasticity(self, stokes16_hier):
        for s in stokes16_hier.systems:
            assert s.elasticity is None

    def test_elasticity_shape_validated(self):
        lv = build_hierarchy(8).finest
        params = FluidParams(rho=0.0, mu=1.0, dt=0.1)
        with pytest.raises(ValueError):
            StokesIBLevelSystem(level=lv, params=params, elasticity=sp.eye(3).tocsr())
