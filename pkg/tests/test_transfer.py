import numpy as np
import pytest

from ibmg.grid import build_hierarchy
from ibmg.transfer import (
    build_P_u,
    build_R_u,
    prolong_pressure,
    prolong_velocity,
    restrict_pressure,
    restrict_velocity,
)


@pytest.fixture(scope="module")
def pair16():
    grid = build_hierarchy(16)
    return grid.levels[0], grid.levels[1]  # 8 -> 16


class TestVelocityProlongation:
    def test_reproduces_constants(self, pair16):
        coarse, fine = pair16
        u1f, u2f = prolong_velocity(
            np.full(coarse.shape_u1, 3.0), np.full(coarse.shape_u2, -1.5), fine
        )
        assert np.abs(u1f - 3.0).max() == 0.0
        assert np.abs(u2f + 1.5).max() == 0.0

    def test_reproduces_normal_linears(self, pair16):
        coarse, fine = pair16
        xc = (np.arange(coarse.n + 1) * coarse.h)[:, None] * np.ones((1, coarse.n))
        u1f, _ = prolong_velocity(xc, np.zeros(coarse.shape_u2), fine)
        xf = (np.arange(fine.n + 1) * fine.h)[:, None] * np.ones((1, fine.n))
        assert np.abs(u1f - xf).max() < 1e-15
        yc = (np.arange(coarse.n + 1) * coarse.h)[None, :] * np.ones((coarse.n, 1))
        _, u2f = prolong_velocity(np.zeros(coarse.shape_u1), yc, fine)
        yf = (np.arange(fine.n + 1) * fine.h)[None, :] * np.ones((fine.n, 1))
        assert np.abs(u2f - yf).max() < 1e-15

    def test_impulse_footprint(self, pair16):
        # a unit coarse face touches only the fine faces of its two cells
        coarse, fine = pair16
        u1c = np.zeros(coarse.shape_u1)
        u1c[4, 3] = 1.0
        u1f, _ = prolong_velocity(u1c, np.zeros(coarse.shape_u2), fine)
        nz = np.argwhere(u1f != 0.0)
        # normal direction: fine faces 2*4-1 .. 2*4+1; tangential: cells 6,7
        assert set(nz[:, 0]) <= {7, 8, 9}
        assert set(nz[:, 1]) <= {6, 7}


class TestVelocityRestriction:
    def test_adjointness(self, pair16):
        coarse, fine = pair16
        rng = np.random.default_rng(0)
        hf2, hc2 = fine.h**2, coarse.h**2
        for _ in range(20):
            u1c = rng.standard_normal(coarse.shape_u1)
            u2c = rng.standard_normal(coarse.shape_u2)
            v1f = rng.standard_normal(fine.shape_u1)
            v2f = rng.standard_normal(fine.shape_u2)
            p1, p2 = prolong_velocity(u1c, u2c, fine)
            r1, r2 = restrict_velocity(v1f, v2f, coarse)
            lhs = hf2 * (np.sum(p1 * v1f) + np.sum(p2 * v2f))
            rhs = hc2 * (np.sum(u1c * r1) + np.sum(u2c * r2))
            assert lhs == pytest.approx(rhs, rel=1e-14)

    def test_exact_matrix_identity(self, pair16):
        # R assembled from the restriction arrays equals (1/4) P^T entrywise
        coarse, fine = pair16
        p_mat = build_P_u(coarse, fine).toarray()
        r_rows = []
        for k in range(fine.n_u):
            e = np.zeros(fine.n_u)
            e[k] = 1.0
            r1, r2 = restrict_velocity(
                e[: fine.n_u1].reshape(fine.shape_u1),
                e[fine.n_u1 :].reshape(fine.shape_u2),
                coarse,
            )
            r_rows.append(np.concatenate([r1.ravel(), r2.ravel()]))
        r_mat = np.stack(r_rows, axis=1)
        assert np.array_equal(r_mat, 0.25 * p_mat.T)
        assert np.array_equal(build_R_u(coarse, fine).toarray(), 0.25 * p_mat.T)

    def test_restrict_prolong_constant(self, pair16):
        # interior coarse faces recover the constant exactly; wall-normal
        # faces see the clipped adjoint weight 3/4 (frozen regression values)
        coarse, fine = pair16
        c = 2.0
        u1f, u2f = prolong_velocity(
            np.full(coarse.shape_u1, c), np.full(coarse.shape_u2, c), fine
        )
        r1, r2 = restrict_velocity(u1f, u2f, coarse)
        assert np.abs(r1[1:-1, :] - c).max() < 1e-14
        assert np.abs(r2[:, 1:-1] - c).max() < 1e-14
        assert np.abs(r1[0, :] - 0.75 * c).max() < 1e-14
        assert np.abs(r1[-1, :] - 0.75 * c).max() < 1e-14

    def test_zero(self, pair16):
        coarse, fine = pair16
        r1, r2 = restrict_velocity(np.zeros(fine.shape_u1), np.zeros(fine.shape_u2), coarse)
        assert np.abs(r1).max() == 0.0 and np.abs(r2).max() == 0.0


class TestPressureTransfers:
    def test_constants(self, pair16):
        coarse, fine = pair16
        pf = prolong_pressure(np.full(coarse.shape_p, 4.0), fine)
        assert np.abs(pf - 4.0).max() < 1e-14
        pc = restrict_pressure(np.full(fine.shape_p, 4.0), coarse)
        assert np.abs(pc - 4.0).max() == 0.0

    def test_restrict_linear_exact(self, pair16):
        coarse, fine = pair16
        xf = ((np.arange(fine.n) + 0.5) * fine.h)[:, None] * np.ones((1, fine.n))
        xc = ((np.arange(coarse.n) + 0.5) * coarse.h)[:, None] * np.ones((1, coarse.n))
        assert np.abs(restrict_pressure(xf, coarse) - xc).max() < 1e-15

    def test_prolong_linear_exact(self, pair16):
        # one-sided extrapolation keeps boundary cells exact on linears too
        coarse, fine = pair16
        xc = ((np.arange(coarse.n) + 0.5) * coarse.h)[:, None] * np.ones((1, coarse.n))
        xf = ((np.arange(fine.n) + 0.5) * fine.h)[:, None] * np.ones((1, fine.n))
        assert np.abs(prolong_pressure(xc, fine) - xf).max() < 1e-14

    def test_shapes_validated(self, pair16):
        coarse, fine = pair16
        with pytest.raises(ValueError):
            prolong_pressure(np.zeros((3, 3)), fine)
        with pytest.raises(ValueError):
            restrict_pressure(np.zeros((3, 3)), coarse)
        with pytest.raises(ValueError):
            prolong_velocity(np.zeros((3, 3)), np.zeros(coarse.shape_u2), fine)
        with pytest.raises(ValueError):
            restrict_velocity(np.zeros((3, 3)), np.zeros(fine.shape_u2), coarse)
