"""Staggered MAC grid hierarchy and the block (velocity, pressure) vector type.

Velocity components live on cell faces, pressure at cell centers, on the unit
square.  A level with n cells per side stores u1 on x-faces with shape
(n+1, n), u2 on y-faces with shape (n, n+1), and p with shape (n, n).
Array index [i, j] of u1 sits at (i*h, (j+1/2)*h); u2 at ((i+1/2)*h, j*h);
p at ((i+1/2)*h, (j+1/2)*h).

Face arrays include the boundary faces.  Velocity faces lying on the domain
walls carry Dirichlet data and are masked out of the unknown set; pressure has
no boundary degrees of freedom.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

COARSEST_N = 8
REFINEMENT_RATIO = 2


@dataclass(frozen=True)
class StaggeredLevel:
    """One uniform MAC level; flat DOF layout is [u1 | u2 | p]."""

    index: int
    n: int

    @property
    def h(self) -> float:
        return 1.0 / self.n

    @property
    def shape_u1(self) -> tuple[int, int]:
        return (self.n + 1, self.n)

    @property
    def shape_u2(self) -> tuple[int, int]:
        return (self.n, self.n + 1)

    @property
    def shape_p(self) -> tuple[int, int]:
        return (self.n, self.n)

    @property
    def n_u1(self) -> int:
        return (self.n + 1) * self.n

    @property
    def n_u2(self) -> int:
        return self.n * (self.n + 1)

    @property
    def n_u(self) -> int:
        return self.n_u1 + self.n_u2

    @property
    def n_p(self) -> int:
        return self.n * self.n

    @property
    def n_dofs(self) -> int:
        return self.n_u + self.n_p

    @cached_property
    def dirichlet_mask_u(self) -> np.ndarray:
        """Boolean mask over the flat velocity DOFs; True on wall faces."""
        m1 = np.zeros(self.shape_u1, dtype=bool)
        m1[0, :] = True
        m1[-1, :] = True
        m2 = np.zeros(self.shape_u2, dtype=bool)
        m2[:, 0] = True
        m2[:, -1] = True
        return np.concatenate([m1.ravel(), m2.ravel()])

    @cached_property
    def dirichlet_mask(self) -> np.ndarray:
        """Mask over all flat DOFs (pressure entries are never Dirichlet)."""
        return np.concatenate(
            [self.dirichlet_mask_u, np.zeros(self.n_p, dtype=bool)]
        )

    @cached_property
    def unknown_indices(self) -> np.ndarray:
        return np.flatnonzero(~self.dirichlet_mask)


@dataclass(frozen=True)
class GridHierarchy:
    """Levels 0 (coarsest, 8x8) through n_levels-1 (finest) on [0,1]^2."""

    finest_n: int
    levels: tuple[StaggeredLevel, ...] = field(default=())

    @property
    def n_levels(self) -> int:
        return len(self.levels)

    @property
    def finest(self) -> StaggeredLevel:
        return self.levels[-1]

    @property
    def coarsest(self) -> StaggeredLevel:
        return self.levels[0]


def build_hierarchy(finest_n: int) -> GridHierarchy:
    """Build the level stack for a finest grid of ``finest_n`` cells per side.

    ``finest_n`` must equal 8 * 2**k; level ell then has 8 * 2**ell cells.
    """
    n = int(finest_n)
    if n < COARSEST_N:
        raise ValueError(f"finest_n must be at least {COARSEST_N}, got {finest_n}")
    k = 0
    m = COARSEST_N
    while m < n:
        m *= REFINEMENT_RATIO
        k += 1
    if m != n:
        raise ValueError(f"finest_n must be 8 * 2**k, got {finest_n}")
    levels = tuple(
        StaggeredLevel(index=ell, n=COARSEST_N * REFINEMENT_RATIO**ell)
        for ell in range(k + 1)
    )
    return GridHierarchy(finest_n=n, levels=levels)


class BlockVector:
    """A (velocity, pressure) field on one level, backed by one flat array.

    ``u1``, ``u2`` and ``p`` are reshaped views into ``data``, so flat linear
    algebra and stencil access never copy.
    """

    __slots__ = ("level", "data")

    def __init__(self, level: StaggeredLevel, data: np.ndarray | None = None):
        if data is None:
            data = np.zeros(level.n_dofs)
        else:
            data = np.asarray(data, dtype=float)
            if data.shape != (level.n_dofs,):
                raise ValueError(
                    f"data length {data.shape} does not match level with "
                    f"{level.n_dofs} DOFs"
                )
        self.level = level
        self.data = data

    @property
    def u_flat(self) -> np.ndarray:
        return self.data[: self.level.n_u]

    @u_flat.setter
    def u_flat(self, value) -> None:
        self.data[: self.level.n_u] = np.asarray(value, dtype=float).ravel()

    @property
    def u1(self) -> np.ndarray:
        lv = self.level
        return self.data[: lv.n_u1].reshape(lv.shape_u1)

    @u1.setter
    def u1(self, value) -> None:
        self.data[: self.level.n_u1] = np.asarray(value, dtype=float).ravel()

    @property
    def u2(self) -> np.ndarray:
        lv = self.level
        return self.data[lv.n_u1 : lv.n_u].reshape(lv.shape_u2)

    @u2.setter
    def u2(self, value) -> None:
        lv = self.level
        self.data[lv.n_u1 : lv.n_u] = np.asarray(value, dtype=float).ravel()

    @property
    def p(self) -> np.ndarray:
        lv = self.level
        return self.data[lv.n_u :].reshape(lv.shape_p)

    @p.setter
    def p(self, value) -> None:
        self.data[self.level.n_u :] = np.asarray(value, dtype=float).ravel()

    def copy(self) -> "BlockVector":
        return BlockVector(self.level, self.data.copy())

    def __repr__(self) -> str:  # pragma: no cover
        return f"BlockVector(level={self.level.index}, n={self.level.n})"


def _check_same_level(a: BlockVector, b: BlockVector) -> None:
    if a.level is not b.level and a.level != b.level:
        raise ValueError(
            f"level mismatch: {a.level.index} (n={a.level.n}) vs "
            f"{b.level.index} (n={b.level.n})"
        )


def block_inner_product(a: BlockVector, b: BlockVector) -> float:
    """Grid-weighted l2 inner product: h^2 * (sum over all u and p entries)."""
    _check_same_level(a, b)
    h = a.level.h
    return h * h * float(a.data @ b.data)


def block_norm(a: BlockVector) -> float:
    return np.sqrt(max(block_inner_product(a, a), 0.0))


def axpy(alpha: float, x: BlockVector, y: BlockVector) -> BlockVector:
    """y <- y + alpha * x, in place; returns y."""
    _check_same_level(x, y)
    y.data += alpha * x.data
    return y


def scale(alpha: float, x: BlockVector) -> BlockVector:
    """x <- alpha * x, in place; returns x."""
    x.data *= alpha
    return x


def copy_into(src: BlockVector, dst: BlockVector) -> BlockVector:
    """dst <- src, in place; returns dst."""
    _check_same_level(src, dst)
    dst.data[:] = src.data
    return dst
