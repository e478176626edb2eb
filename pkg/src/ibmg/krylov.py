"""Flexible GMRES on flat arrays with a grid-weighted inner product.

Right preconditioning only, no restarts: the preconditioner may change from
step to step (V-cycles with inner FGMRES wraps are not stationary), and the
monitored residual is the true residual of the unpreconditioned system.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class FGMRESInfo:
    iterations: int
    residuals: list[float]  # true relative residual after each step, [0] = 1
    converged: bool
    breakdown: bool = False


def fgmres(
    apply_op,
    apply_prec,
    b: np.ndarray,
    x0: np.ndarray | None = None,
    *,
    tol: float,
    max_iters: int,
    weight: float = 1.0,
) -> tuple[np.ndarray, FGMRESInfo]:
    """Solve op x = b to a relative tolerance on the true residual.

    ``weight`` scales the Euclidean inner product (h^2 for grid functions);
    it cancels in every relative quantity but keeps reported norms physical.
    A vanishing Arnoldi continuation vector is a happy breakdown: the current
    iterate is exact and the solve is marked converged.
    """

    def dot(u, v):
        return weight * float(u @ v)

    def norm(u):
        return np.sqrt(max(dot(u, u), 0.0))

    b = np.asarray(b, dtype=float)
    x0 = np.zeros_like(b) if x0 is None else np.asarray(x0, dtype=float)
    norm_b = norm(b)
    if norm_b == 0.0:
        return x0.copy(), FGMRESInfo(0, [0.0], True)
    r0 = b - apply_op(x0) if x0.any() else b.copy()
    beta = norm(r0)
    residuals = [beta / norm_b]
    if beta <= tol * norm_b:
        return x0.copy(), FGMRESInfo(0, residuals, True)

    m = max_iters
    basis = [r0 / beta]
    z_vecs: list[np.ndarray] = []
    hess = np.zeros((m + 1, m))
    cs = np.zeros(m)
    sn = np.zeros(m)
    g = np.zeros(m + 1)
    g[0] = beta

    def form_solution(k: int) -> np.ndarray:
        y = np.linalg.solve(np.triu(hess[:k, :k]), g[:k])
        x = x0.copy()
        for j in range(k):
            x += y[j] * z_vecs[j]
        return x

    monitor_true = tol > 0.0
    converged = False
    breakdown = False
    k = 0
    for j in range(m):
        z = apply_prec(basis[j])
        z_vecs.append(z)
        v = apply_op(z)
        # modified Gram-Schmidt with one reorthogonalization pass
        for _ in range(2):
            for i in range(j + 1):
                c = dot(basis[i], v)
                hess[i, j] += c
                v -= c * basis[i]
        h_next = norm(v)
        hess[j + 1, j] = h_next
        happy = h_next <= 1e-14 * norm_b
        if not happy:
            basis.append(v / h_next)
        # Givens update of the Hessenberg column
        for i in range(j):
            t = cs[i] * hess[i, j] + sn[i] * hess[i + 1, j]
            hess[i + 1, j] = -sn[i] * hess[i, j] + cs[i] * hess[i + 1, j]
            hess[i, j] = t
        denom = np.hypot(hess[j, j], hess[j + 1, j])
        if denom == 0.0:
            breakdown = True
            k = j
            break
        cs[j] = hess[j, j] / denom
        sn[j] = hess[j + 1, j] / denom
        hess[j, j] = denom
        hess[j + 1, j] = 0.0
        g[j + 1] = -sn[j] * g[j]
        g[j] = cs[j] * g[j]
        k = j + 1
        if monitor_true:
            x = form_solution(k)
            res = norm(b - apply_op(x)) / norm_b
        else:
            res = abs(g[j + 1]) / norm_b
        residuals.append(res)
        if happy or (monitor_true and res <= tol):
            converged = True
            break

    x = form_solution(k) if k > 0 else x0.copy()
    if not converged and not breakdown:
        converged = residuals[-1] <= tol
    if np.any(~np.isfinite(x)):
        breakdown = True
        converged = False
    return x, FGMRESInfo(k, residuals, converged, breakdown)
