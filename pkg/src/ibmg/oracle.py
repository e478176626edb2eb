"""Brute-force dense reference implementations, used only by tests.

Everything here is written directly from the defining formulas, independent
of the production stencil kernels: the finite differences are evaluated
row-by-row with explicit neighbor picks, and the coupling operators are
full sums of the kernel over every face and node (no stencil windows).
Dense block matrices are built by driving these operators with unit vectors.
Grids are limited to a few thousand DOFs.
"""

from __future__ import annotations

import warnings

import numpy as np
import scipy.linalg as la

from .fibers import FiberMesh
from .grid import StaggeredLevel
from .operators import FluidParams

MAX_DENSE_DOFS = 4600


def _guard(n_dofs: int) -> None:
    if n_dofs > MAX_DENSE_DOFS:
        raise ValueError(f"dense oracle limited to ~4000 DOFs, got {n_dofs}")


def _phi_ref(r: np.ndarray) -> np.ndarray:
    r = np.abs(r)
    with np.errstate(invalid="ignore"):
        inner = (3.0 - 2.0 * r + np.sqrt(np.maximum(1.0 + 4.0 * r - 4.0 * r * r, 0.0))) / 8.0
        outer = (5.0 - 2.0 * r - np.sqrt(np.maximum(-7.0 + 12.0 * r - 4.0 * r * r, 0.0))) / 8.0
    return np.where(r < 1.0, inner, np.where(r < 2.0, outer, 0.0))


def naive_apply_A(params: FluidParams, u1, u2, n: int):
    h2 = (1.0 / n) ** 2
    a = params.rho / params.dt
    mu = params.mu
    out1 = np.zeros_like(u1)
    for j in range(n):
        below = u1[:, j - 1] if j > 0 else -u1[:, 0]
        above = u1[:, j + 1] if j < n - 1 else -u1[:, n - 1]
        lap = (below - 2.0 * u1[:, j] + above) / h2
        lap[1:-1] += (u1[:-2, j] - 2.0 * u1[1:-1, j] + u1[2:, j]) / h2
        out1[:, j] = a * u1[:, j] - mu * lap
    out1[0, :] = u1[0, :]
    out1[n, :] = u1[n, :]
    out2 = np.zeros_like(u2)
    for i in range(n):
        left = u2[i - 1, :] if i > 0 else -u2[0, :]
        right = u2[i + 1, :] if i < n - 1 else -u2[n - 1, :]
        lap = (left - 2.0 * u2[i, :] + right) / h2
        lap[1:-1] += (u2[i, :-2] - 2.0 * u2[i, 1:-1] + u2[i, 2:]) / h2
        out2[i, :] = a * u2[i, :] - mu * lap
    out2[:, 0] = u2[:, 0]
    out2[:, n] = u2[:, n]
    return out1, out2


def naive_apply_G(p, n: int):
    h = 1.0 / n
    g1 = np.zeros((n + 1, n))
    g2 = np.zeros((n, n + 1))
    for i in range(1, n):
        g1[i, :] = (p[i, :] - p[i - 1, :]) / h
    for j in range(1, n):
        g2[:, j] = (p[:, j] - p[:, j - 1]) / h
    return g1, g2


def naive_apply_D(u1, u2, n: int):
    h = 1.0 / n
    out = np.zeros((n, n))
    for i in range(n):
        for_j = (u2[i, 1:] - u2[i, :-1]) / h
        out[i, :] = (u1[i + 1, :] - u1[i, :]) / h + for_j
    return out


def _node_face_weights(level: StaggeredLevel, node: np.ndarray):
    """Full-grid kernel weights phi*phi of one node at every face."""
    n, h = level.n, level.h
    x, y = node
    i_u1 = np.arange(n + 1)
    j_u1 = np.arange(n) + 0.5
    w1 = np.outer(_phi_ref(i_u1 - x / h), _phi_ref(j_u1 - y / h))
    i_u2 = np.arange(n) + 0.5
    j_u2 = np.arange(n + 1)
    w2 = np.outer(_phi_ref(i_u2 - x / h), _phi_ref(j_u2 - y / h))
    return w1, w2


def dense_S_J(level: StaggeredLevel, meshes: list[FiberMesh]):
    """Dense spreading and interpolation matrices from the kernel sums.

    Layout: Lagrangian DOFs are [all x | all y] over the concatenated nodes;
    S has shape (n_u, 2M), J has shape (2M, n_u).
    """
    nodes = np.concatenate([m.positions.reshape(-1, 2) for m in meshes])
    weights = np.concatenate([np.full(m.n_nodes, m.ds1 * m.ds2) for m in meshes])
    n_nodes = len(nodes)
    s = np.zeros((level.n_u, 2 * n_nodes))
    j = np.zeros((2 * n_nodes, level.n_u))
    h2 = level.h * level.h
    for k in range(n_nodes):
        w1, w2 = _node_face_weights(level, nodes[k])
        s[: level.n_u1, k] = w1.ravel() * weights[k] / h2
        s[level.n_u1 :, n_nodes + k] = w2.ravel() * weights[k] / h2
        j[k, : level.n_u1] = w1.ravel()
        j[n_nodes + k, level.n_u1 :] = w2.ravel()
    return s, j


def dense_K(meshes: list[FiberMesh]) -> np.ndarray:
    """Dense stiffness over the [all x | all y] concatenated-node layout."""
    n_nodes = sum(m.n_nodes for m in meshes)
    ks = np.zeros((n_nodes, n_nodes))
    start = 0
    for mesh in meshes:
        c = mesh.alpha / (mesh.ds1 * mesh.ds1)
        for l in range(mesh.m1):
            for m in range(mesh.m2):
                row = start + l * mesh.m2 + m
                ks[row, start + ((l + 1) % mesh.m1) * mesh.m2 + m] += c
                ks[row, start + ((l - 1) % mesh.m1) * mesh.m2 + m] += c
                ks[row, row] -= 2.0 * c
        start += mesh.n_nodes
    return np.block(
        [[ks, np.zeros_like(ks)], [np.zeros_like(ks), ks]]
    )


def dense_A(params: FluidParams, level: StaggeredLevel) -> np.ndarray:
    _guard(level.n_u)
    n = level.n
    mat = np.zeros((level.n_u, level.n_u))
    for k in range(level.n_u):
        e = np.zeros(level.n_u)
        e[k] = 1.0
        o1, o2 = naive_apply_A(
            params,
            e[: level.n_u1].reshape(level.shape_u1),
            e[level.n_u1 :].reshape(level.shape_u2),
            n,
        )
        mat[:, k] = np.concatenate([o1.ravel(), o2.ravel()])
    return mat


def dense_G(level: StaggeredLevel) -> np.ndarray:
    _guard(level.n_u)
    mat = np.zeros((level.n_u, level.n_p))
    for k in range(level.n_p):
        e = np.zeros(level.n_p)
        e[k] = 1.0
        g1, g2 = naive_apply_G(e.reshape(level.shape_p), level.n)
        mat[:, k] = np.concatenate([g1.ravel(), g2.ravel()])
    return mat


def dense_D(level: StaggeredLevel) -> np.ndarray:
    _guard(level.n_u)
    mat = np.zeros((level.n_p, level.n_u))
    for k in range(level.n_u):
        e = np.zeros(level.n_u)
        e[k] = 1.0
        mat[:, k] = naive_apply_D(
            e[: level.n_u1].reshape(level.shape_u1),
            e[level.n_u1 :].reshape(level.shape_u2),
            level.n,
        ).ravel()
    return mat


def dense_assemble_LIB(
    params: FluidParams,
    level: StaggeredLevel,
    meshes: list[FiberMesh] | None = None,
) -> np.ndarray:
    """Dense Stokes-IB block operator; identity rows at wall faces."""
    _guard(level.n_dofs)
    a = dense_A(params, level)
    if meshes:
        s, j = dense_S_J(level, meshes)
        skj = s @ dense_K(meshes) @ j
        interior = ~level.dirichlet_mask_u
        a = a - params.dt * (interior[:, None] * skj)
    g = dense_G(level)
    d = dense_D(level)
    top = np.hstack([a, g])
    bottom = np.hstack([-d, np.zeros((level.n_p, level.n_p))])
    return np.vstack([top, bottom])


def dense_assemble_eq10(
    params: FluidParams,
    level: StaggeredLevel,
    meshes: list[FiberMesh],
) -> np.ndarray:
    """Dense unreduced block system over (u, p, X)."""
    nodes = sum(m.n_nodes for m in meshes)
    _guard(level.n_dofs + 2 * nodes)
    a = dense_A(params, level)
    g = dense_G(level)
    d = dense_D(level)
    s, j = dense_S_J(level, meshes)
    k = dense_K(meshes)
    sk = s @ k
    interior = ~level.dirichlet_mask_u
    sk = interior[:, None] * sk
    n_u, n_p, n_x = level.n_u, level.n_p, 2 * nodes
    top = np.hstack([a, g, -sk])
    mid = np.hstack([-d, np.zeros((n_p, n_p)), np.zeros((n_p, n_x))])
    bot = np.hstack([-j, np.zeros((n_x, n_p)), np.eye(n_x) / params.dt])
    return np.vstack([top, mid, bot])


class DenseSolver:
    """Pivoted LU with rank-1-deficiency handling and iterative refinement.

    A singular system (constant-pressure null mode) is solved through a
    bordered extension [[M, c], [r, 0]] with random seeded border vectors:
    for consistent right-hand sides the border multiplier vanishes and the
    bordered solve returns an exact particular solution.  Refinement reuses
    the one factorization to recover the digits the stiff elasticity block
    loses along its dominant directions.
    """

    def __init__(self, matrix: np.ndarray, refine: int = 3, seed: int = 0):
        self.matrix = np.asarray(matrix, dtype=float)
        self.refine = refine
        n = self.matrix.shape[0]
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            lu, piv = la.lu_factor(self.matrix)
        d = np.abs(np.diag(lu))
        if d.min() > 1e-10 * d.max():
            self._factors = (lu, piv)
            self._bordered = False
        else:
            rng = np.random.default_rng(seed)
            scale = np.max(np.abs(self.matrix))
            c = rng.standard_normal(n)
            c *= scale / np.linalg.norm(c)
            r = rng.standard_normal(n)
            r /= np.linalg.norm(r)
            mb = np.zeros((n + 1, n + 1))
            mb[:n, :n] = self.matrix
            mb[:n, n] = c
            mb[n, :n] = r
            self._factors = la.lu_factor(mb)
            self._bordered = True

    def _solve_once(self, b: np.ndarray) -> np.ndarray:
        if not self._bordered:
            return la.lu_solve(self._factors, b)
        bb = np.concatenate([b, [0.0]])
        return la.lu_solve(self._factors, bb)[: len(b)]

    def solve(self, rhs: np.ndarray, rtol: float = 1e-9) -> np.ndarray:
        x = self._solve_once(rhs)
        for _ in range(self.refine):
            x = x + self._solve_once(rhs - self.matrix @ x)
        norm_b = np.linalg.norm(rhs)
        if norm_b > 0:
            rel = np.linalg.norm(self.matrix @ x - rhs) / norm_b
            if rel > rtol:
                raise la.LinAlgError(
                    f"dense solve residual {rel:.3e} exceeds {rtol:.1e}; "
                    "system inconsistent beyond the pressure null mode"
                )
        return x


def dense_solve(matrix: np.ndarray, rhs: np.ndarray, rtol: float = 1e-9) -> np.ndarray:
    """Direct solve tolerating the one-dimensional pressure null mode."""
    return DenseSolver(matrix).solve(rhs, rtol=rtol)
