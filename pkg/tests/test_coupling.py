import numpy as np
import pytest

from ibmg.coupling import CouplingOperators, fiber_inner_product, phi
from ibmg.fibers import (
    FiberMesh,
    assemble_K_scalar_multi,
    make_suspension,
    make_thick_annulus,
    make_thin_membrane,
)
from ibmg.grid import build_hierarchy
from ibmg import oracle


def geometries():
    return [
        ("thick", [make_thick_annulus(32, 1.0)], build_hierarchy(32).finest),
        ("thin", [make_thin_membrane(16, 1.0)], build_hierarchy(16).finest),
        (
            "suspension",
            make_suspension(64, 1.0, seed=11),
            build_hierarchy(64).finest,
        ),
    ]


class TestPhi:
    def test_point_values(self):
        assert phi(2.5) == 0.0
        assert phi(2.0) == 0.0
        assert phi(0.0) == pytest.approx(0.5, abs=0.0)
        assert phi(1.0) == pytest.approx(0.25, abs=1e-15)

    def test_even(self):
        r = np.linspace(0, 3, 301)
        assert np.array_equal(phi(r), phi(-r))

    def test_branch_continuity_at_one(self):
        eps = 1e-12
        assert phi(1.0 - eps) == pytest.approx(phi(1.0 + eps), abs=1e-11)

    def test_partition_of_unity(self):
        r = np.linspace(0.0, 1.0, 2001, endpoint=False)
        total = sum(phi(r - j) for j in range(-3, 4))
        assert np.abs(total - 1.0).max() < 1e-14

    def test_first_moment(self):
        r = np.linspace(0.0, 1.0, 2001, endpoint=False)
        moment = sum((r - j) * phi(r - j) for j in range(-3, 4))
        assert np.abs(moment).max() < 1e-13


class TestSpreadInterpolate:
    def test_zero_maps_to_zero(self):
        lv = build_hierarchy(16).finest
        ops = CouplingOperators(lv, make_thin_membrane(16, 1.0))
        f1, f2 = ops.spread(np.zeros((ops.n_nodes, 2)))
        assert np.abs(f1).max() == 0.0 and np.abs(f2).max() == 0.0
        u = ops.interpolate(np.zeros(lv.shape_u1), np.zeros(lv.shape_u2))
        assert np.abs(u).max() == 0.0

    def test_single_node_total_force(self):
        lv = build_hierarchy(16).finest
        mesh = make_thin_membrane(16, 1.0)
        ops = CouplingOperators(lv, mesh)
        force = np.zeros((ops.n_nodes, 2))
        force[3, 0] = 1.0
        f1, _ = ops.spread(force)
        assert np.sum(f1) * lv.h**2 == pytest.approx(mesh.ds1 * mesh.ds2, rel=1e-13)

    def test_node_at_face_center(self):
        # node placed exactly on a u1 face: weight phi(0)^2 = 1/4 there
        lv = build_hierarchy(16).finest
        h = lv.h
        face = np.array([8 * h, (7 + 0.5) * h])
        angles = np.arange(4) * (2 * np.pi / 4)
        pos = face + 0.05 * np.stack([np.cos(angles), np.sin(angles)], axis=-1)
        pos[0] = face
        mesh = FiberMesh(positions=pos[:, None, :], ds1=0.3, ds2=1.0, alpha=1.0)
        ops = CouplingOperators(lv, mesh)
        force = np.zeros((4, 2))
        force[0, 0] = 1.0
        f1, _ = ops.spread(force)
        assert f1[8, 7] == pytest.approx(0.25 * 0.3 / h**2, rel=1e-14)

    def test_constant_field_interpolates_exactly(self):
        lv = build_hierarchy(16).finest
        ops = CouplingOperators(lv, make_thin_membrane(16, 1.0))
        u = ops.interpolate(np.full(lv.shape_u1, 1.25), np.full(lv.shape_u2, -2.5))
        assert np.abs(u[:, 0] - 1.25).max() < 1e-14
        assert np.abs(u[:, 1] + 2.5).max() < 1e-14

    @pytest.mark.parametrize("name,meshes,level", geometries())
    def test_adjointness(self, name, meshes, level):
        ops = CouplingOperators(level, meshes)
        rng = np.random.default_rng(42)
        h2 = level.h**2
        for _ in range(100):
            force = rng.standard_normal((ops.n_nodes, 2))
            u1 = rng.standard_normal(level.shape_u1)
            u2 = rng.standard_normal(level.shape_u2)
            f1, f2 = ops.spread(force)
            interp = ops.interpolate(u1, u2)
            lhs = h2 * (np.sum(f1 * u1) + np.sum(f2 * u2))
            rhs = fiber_inner_product(ops, force, interp)
            assert lhs == pytest.approx(rhs, rel=1e-13)

    def test_nodes_near_wall_rejected(self):
        lv = build_hierarchy(16).finest
        pos = np.full((4, 1, 2), 0.5)
        pos[:, 0, 0] = [0.05, 0.4, 0.5, 0.6]  # 0.05 < 2h = 0.125
        mesh = FiberMesh(positions=pos, ds1=1.0, ds2=1.0, alpha=1.0)
        with pytest.raises(ValueError, match="kernel support"):
            CouplingOperators(lv, mesh)

    def test_stencil_size(self):
        lv = build_hierarchy(16).finest
        ops = CouplingOperators(lv, make_thin_membrane(16, 1.0))
        # every interior node touches exactly a 4x4 window per component
        assert ops._idx1.shape == (ops.n_nodes, 16)
        assert ops._idx2.shape == (ops.n_nodes, 16)

    def test_shape_mismatch(self):
        lv = build_hierarchy(16).finest
        ops = CouplingOperators(lv, make_thin_membrane(16, 1.0))
        with pytest.raises(ValueError):
            ops.spread(np.zeros((3, 2)))
        with pytest.raises(ValueError):
            ops.interpolate(np.zeros((2, 2)), np.zeros(lv.shape_u2))


class TestSKJ:
    def test_zero_stiffness_gives_zero(self):
        lv = build_hierarchy(16).finest
        mesh = make_thin_membrane(16, 0.0)
        ops = CouplingOperators(lv, mesh)
        e = ops.assemble_skj(assemble_K_scalar_multi([mesh]))
        assert e.nnz == 0 or np.abs(e.data).max() == 0.0

    def test_symmetry_and_nsd(self):
        lv = build_hierarchy(32).finest
        mesh = make_thick_annulus(32, 1.0)
        ops = CouplingOperators(lv, mesh)
        e = ops.assemble_skj(assemble_K_scalar_multi([mesh]))
        assert abs(e - e.T).max() <= 1e-12 * abs(e).max()
        rng = np.random.default_rng(0)
        for _ in range(5):
            u = rng.standard_normal(e.shape[0])
            assert u @ (e @ u) <= 1e-10 * np.abs(e).max() * (u @ u)

    def test_matches_operator_composition(self):
        lv = build_hierarchy(16).finest
        mesh = make_thin_membrane(16, 1.0)
        ops = CouplingOperators(lv, mesh)
        ks = assemble_K_scalar_multi([mesh])
        e = ops.assemble_skj(ks)
        rng = np.random.default_rng(1)
        for _ in range(5):
            u1 = rng.standard_normal(lv.shape_u1)
            u2 = rng.standard_normal(lv.shape_u2)
            interp = ops.interpolate(u1, u2)
            force = np.stack([ks @ interp[:, 0], ks @ interp[:, 1]], axis=-1)
            f1, f2 = ops.spread(force)
            composed = np.concatenate([f1.ravel(), f2.ravel()])
            direct = e @ np.concatenate([u1.ravel(), u2.ravel()])
            assert np.allclose(direct, composed, rtol=1e-13, atol=1e-13 * np.abs(composed).max())

    def test_against_dense_composition(self):
        # independent dense S * K * J on a tiny fiber
        lv = build_hierarchy(16).finest
        mesh = make_thin_membrane(16, 1.0)
        ops = CouplingOperators(lv, mesh)
        e = ops.assemble_skj(assemble_K_scalar_multi([mesh])).toarray()
        s, j = oracle.dense_S_J(lv, [mesh])
        k = oracle.dense_K([mesh])
        ref = s @ k @ j
        assert np.allclose(e, ref, rtol=1e-12, atol=1e-12 * np.abs(ref).max())

    def test_row_sparsity_bound(self):
        lv = build_hierarchy(32).finest
        mesh = make_thick_annulus(32, 1.0)
        ops = CouplingOperators(lv, mesh)
        e = ops.assemble_skj(assemble_K_scalar_multi([mesh])).tocsr()
        row_nnz = np.diff(e.indptr)
        # bound: 16 face entries per node within kernel reach of the row
        pos = ops.nodes
        max_nodes_local = 0
        for k in range(ops.n_nodes):
            d = np.abs(pos - pos[k]).max(axis=1)
            max_nodes_local = max(max_nodes_local, int(np.sum(d <= 8 * lv.h)))
        assert row_nnz.max() <= 16 * max_nodes_local

    def test_dimension_mismatch(self):
        lv = build_hierarchy(16).finest
        mesh = make_thin_membrane(16, 1.0)
        ops = CouplingOperators(lv, mesh)
        import scipy.sparse as sp

        with pytest.raises(ValueError):
            ops.assemble_skj(sp.eye(3, format="csr"))
