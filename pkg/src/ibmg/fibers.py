"""Lagrangian fiber meshes and the linear fiber stiffness operator.

Structures are collections of closed elastic fibers with zero rest length:
the nodal force is alpha times the periodic second difference of the node
positions along the fiber direction s1.  Three standard geometries are
provided: a thick annulus (a stack of concentric circular fibers), a single
thin circular membrane, and a random suspension of small circles.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

# reference stiffness: roughly the largest value stable for an explicit
# scheme at dt = 0.005, h = 1/64 in Stokes flow; treated as an opaque constant
ALPHA_BASE = 3.93 / 0.005

ANNULUS_INNER_RADIUS = 0.25
ANNULUS_WIDTH = 1.0 / 16.0
MEMBRANE_RADIUS = 0.25
SUSPENSION_RADIUS = 1.0 / 16.0
SUSPENSION_COUNT = 16
CENTER = (0.5, 0.5)


@dataclass(frozen=True)
class FiberMesh:
    """Nodes indexed (l, m): l runs along each fiber, m labels fibers.

    ``positions`` has shape (M1, M2, 2).  ds2 = 1 for codimension-1 meshes so
    the spreading weight ds1 * ds2 degenerates to ds1.
    """

    positions: np.ndarray
    ds1: float
    ds2: float
    alpha: float
    periodic_s1: bool = True

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float)
        if pos.ndim != 3 or pos.shape[2] != 2:
            raise ValueError("positions must have shape (M1, M2, 2)")
        if pos.shape[0] < 3:
            raise ValueError("need at least 3 nodes along each fiber")
        if np.min(pos) <= 0.0 or np.max(pos) >= 1.0:
            raise ValueError("all nodes must lie strictly inside the unit square")
        if not self.periodic_s1:
            raise ValueError("only closed (periodic) fibers are supported")
        object.__setattr__(self, "positions", pos)

    @property
    def m1(self) -> int:
        return self.positions.shape[0]

    @property
    def m2(self) -> int:
        return self.positions.shape[1]

    @property
    def n_nodes(self) -> int:
        return self.m1 * self.m2

    @property
    def node_weight(self) -> float:
        """Quadrature weight ds1 * ds2 of each node in the coupling sums."""
        return self.ds1 * self.ds2


@dataclass(frozen=True)
class StiffnessSpec:
    """Relative stiffness gamma and the geometry it is normalized for."""

    gamma: float
    geometry: str  # thick | thin | suspension

    @property
    def alpha(self) -> float:
        if self.geometry == "thick":
            return self.gamma * ALPHA_BASE
        if self.geometry in ("thin", "suspension"):
            return 7.0 * self.gamma * ALPHA_BASE
        raise ValueError(f"unknown geometry {self.geometry!r}")


def make_thick_annulus(n: int, gamma: float) -> FiberMesh:
    """Concentric circular fibers filling an annulus of width 1/16.

    M1 = 19N/8 nodes around, M2 = 3N/32 + 1 fibers across; node spacing is
    approximately (2/3) h.  Requires N divisible by 32.
    """
    if n % 32 != 0:
        raise ValueError(f"thick annulus needs N divisible by 32, got {n}")
    m1 = (19 * n) // 8
    m2 = (3 * n) // 32 + 1
    ds1 = 2.0 * np.pi / m1
    ds2 = ANNULUS_WIDTH / (m2 - 1)
    s1 = np.arange(m1) * ds1
    s2 = np.arange(m2) * ds2
    radii = ANNULUS_INNER_RADIUS + s2
    x = CENTER[0] + radii[None, :] * np.cos(s1)[:, None]
    y = CENTER[1] + radii[None, :] * np.sin(s1)[:, None]
    positions = np.stack([x, y], axis=-1)
    alpha = StiffnessSpec(gamma, "thick").alpha
    return FiberMesh(positions=positions, ds1=ds1, ds2=ds2, alpha=alpha)


def make_thin_membrane(n: int, gamma: float) -> FiberMesh:
    """Single closed circular fiber of radius 1/4 with M1 = 19N/8 nodes."""
    if n % 8 != 0:
        raise ValueError(f"thin membrane needs N divisible by 8, got {n}")
    m1 = (19 * n) // 8
    ds1 = 2.0 * np.pi / m1
    s1 = np.arange(m1) * ds1
    x = CENTER[0] + MEMBRANE_RADIUS * np.cos(s1)
    y = CENTER[1] + MEMBRANE_RADIUS * np.sin(s1)
    positions = np.stack([x, y], axis=-1)[:, None, :]
    alpha = StiffnessSpec(gamma, "thin").alpha
    return FiberMesh(positions=positions, ds1=ds1, ds2=1.0, alpha=alpha)


def _circle_mesh(center: np.ndarray, radius: float, h: float, alpha: float) -> FiberMesh:
    m1 = max(3, int(round(2.0 * np.pi * radius / ((2.0 / 3.0) * h))))
    ds1 = 2.0 * np.pi / m1
    s1 = np.arange(m1) * ds1
    x = center[0] + radius * np.cos(s1)
    y = center[1] + radius * np.sin(s1)
    positions = np.stack([x, y], axis=-1)[:, None, :]
    return FiberMesh(positions=positions, ds1=ds1, ds2=1.0, alpha=alpha)


def make_suspension(
    n: int,
    gamma: float,
    seed: int,
    wall_margin: float | None = None,
    gap_margin: float | None = None,
    max_attempts: int = 2000,
    max_restarts: int = 500,
) -> list[FiberMesh]:
    """16 circles of radius 1/16 placed by seeded rejection sampling.

    Centers are redrawn until every pairwise center distance exceeds
    2 * radius + gap_margin and the distance to the walls exceeds
    radius + wall_margin.  Both margins default to 4h, which keeps the
    4h-wide kernel supports away from the walls and from each other; tests on
    very coarse grids may pass smaller margins (wall_margin must stay >= 2h
    for the coupling operators to accept the nodes).
    """
    if n % 8 != 0:
        raise ValueError(f"suspension needs N divisible by 8, got {n}")
    h = 1.0 / n
    if wall_margin is None:
        wall_margin = 4.0 * h
    if gap_margin is None:
        gap_margin = 4.0 * h
    r = SUSPENSION_RADIUS
    lo = r + wall_margin
    hi = 1.0 - lo
    if hi <= lo:
        raise ValueError(f"wall margin {wall_margin} leaves no room for centers")
    min_dist = 2.0 * r + gap_margin
    rng = np.random.default_rng(seed)
    for _ in range(max_restarts):
        centers: list[np.ndarray] = []
        ok = True
        for _ in range(SUSPENSION_COUNT):
            placed = False
            for _ in range(max_attempts):
                c = rng.uniform(lo, hi, size=2)
                if all(np.linalg.norm(c - prev) > min_dist for prev in centers):
                    centers.append(c)
                    placed = True
                    break
            if not placed:
                ok = False
                break
        if ok:
            alpha = StiffnessSpec(gamma, "suspension").alpha
            return [_circle_mesh(c, r, h, alpha) for c in centers]
    raise RuntimeError(
        f"failed to place {SUSPENSION_COUNT} circles after {max_restarts} "
        f"restarts (seed={seed}, N={n})"
    )


def apply_K(mesh: FiberMesh, x: np.ndarray) -> np.ndarray:
    """Nodal force alpha * D2_{s1} x: periodic second difference per fiber."""
    x = np.asarray(x, dtype=float)
    if x.shape != mesh.positions.shape:
        raise ValueError("node array shape mismatch")
    c = mesh.alpha / (mesh.ds1 * mesh.ds1)
    return c * (np.roll(x, -1, axis=0) - 2.0 * x + np.roll(x, 1, axis=0))


def tension_force(mesh: FiberMesh, x: np.ndarray) -> np.ndarray:
    """Force via the half-index tension form: F = D_{s1}(T tau).

    T = alpha * ||D_{s1} X|| and tau = D_{s1} X / ||D_{s1} X||, both at
    half-index positions; for zero rest length this reduces algebraically to
    ``apply_K``.  Degenerate zero-length segments carry zero tension.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != mesh.positions.shape:
        raise ValueError("node array shape mismatch")
    dx = (np.roll(x, -1, axis=0) - x) / mesh.ds1  # at (l + 1/2, m)
    norm = np.linalg.norm(dx, axis=-1, keepdims=True)
    tension = mesh.alpha * norm
    with np.errstate(invalid="ignore", divide="ignore"):
        tau = np.where(norm > 0.0, dx / norm, 0.0)
    t_tau = tension * tau
    return (t_tau - np.roll(t_tau, 1, axis=0)) / mesh.ds1


def assemble_K_scalar(mesh: FiberMesh) -> sp.csr_matrix:
    """Scalar stiffness over node index (l, m) flattened in C order."""
    m1, m2 = mesh.m1, mesh.m2
    c = mesh.alpha / (mesh.ds1 * mesh.ds1)
    idx = np.arange(m1 * m2).reshape(m1, m2)
    up = np.roll(idx, -1, axis=0)
    down = np.roll(idx, 1, axis=0)
    rows = np.concatenate([idx.ravel()] * 3)
    cols = np.concatenate([idx.ravel(), up.ravel(), down.ravel()])
    vals = np.concatenate(
        [np.full(m1 * m2, -2.0 * c), np.full(m1 * m2, c), np.full(m1 * m2, c)]
    )
    mat = sp.csr_matrix((vals, (rows, cols)), shape=(m1 * m2, m1 * m2))
    mat.sum_duplicates()
    return mat


def assemble_K_matrix(mesh: FiberMesh) -> sp.csr_matrix:
    """Full stiffness over Lagrangian DOFs laid out [all x | all y]."""
    ks = assemble_K_scalar(mesh)
    return sp.block_diag([ks, ks], format="csr")


def assemble_K_scalar_multi(meshes: list[FiberMesh]) -> sp.csr_matrix:
    """Block-diagonal scalar stiffness for a list of independent meshes."""
    return sp.block_diag([assemble_K_scalar(m) for m in meshes], format="csr")


def concat_positions(meshes: list[FiberMesh]) -> np.ndarray:
    """All node coordinates as one (n_nodes, 2) array, mesh by mesh."""
    return np.concatenate([m.positions.reshape(-1, 2) for m in meshes], axis=0)


def node_weights(meshes: list[FiberMesh]) -> np.ndarray:
    """Per-node spreading weights ds1 * ds2, concatenated across meshes."""
    return np.concatenate([np.full(m.n_nodes, m.node_weight) for m in meshes])


def apply_K_multi(meshes: list[FiberMesh], x: np.ndarray) -> np.ndarray:
    """apply_K across a concatenated (n_nodes, 2) coordinate array."""
    out = np.empty_like(x)
    start = 0
    for m in meshes:
        stop = start + m.n_nodes
        block = x[start:stop].reshape(m.m1, m.m2, 2)
        out[start:stop] = apply_K(m, block).reshape(-1, 2)
        start = stop
    return out
