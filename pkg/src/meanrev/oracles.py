"""Independent slow references the fast solvers are checked against.

These deliberately share no code with the solvers: projections are
enumerated support by support with a closed form, small QCQPs are solved
on angular grids, and best supports come from exhaustive enumeration.
Used by the self-check command and the test suite.
"""
from __future__ import annotations

from itertools import combinations

import numpy as np

from .errors import Infeasible
from .model import ProblemInstance
from .restricted import RestrictedSolution, solve_restricted


def enumerate_sparse_projection(x: np.ndarray, k: int) -> tuple[float, tuple[int, ...]]:
    """Exact distance^2 from x to the unit k-sparse set, by enumeration.

    For a fixed support I the closest unit vector keeps x_I renormalized,
    at squared distance ||x||^2 + 1 - 2 ||x_I||_2; minimizing over all
    size-k supports gives the global value. Returns (value, best support).
    """
    x = np.asarray(x, dtype=np.float64)
    total = float(x @ x)
    best = np.inf
    best_sup: tuple[int, ...] = ()
    for sup in combinations(range(x.size), k):
        norm = float(np.linalg.norm(x[list(sup)]))
        val = total + 1.0 - 2.0 * norm
        if val < best:
            best = val
            best_sup = sup
    return best, best_sup


def polar_grid_min(
    M: np.ndarray,
    A: np.ndarray,
    rho: float,
    y: np.ndarray,
    phi: float,
    resolution: int = 20000,
) -> float:
    """Two-dimensional x-block oracle on a polar grid.

    For each direction u the objective is an explicit quadratic in the
    radius r, minimized in closed form subject to r^2 u'Au >= phi, so the
    only discretization error is in the angle.
    """
    M = np.asarray(M, dtype=np.float64)
    A = np.asarray(A, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    thetas = np.linspace(0.0, np.pi, resolution, endpoint=False)
    u = np.stack([np.cos(thetas), np.sin(thetas)])
    mu = np.einsum("ip,ij,jp->p", u, M, u)
    au = np.einsum("ip,ij,jp->p", u, A, u)
    yu = y @ u
    y2 = rho * float(y @ y)
    r_min = np.sqrt(phi / au)
    # q(r u) = r^2 (u'Mu + rho) - 2 rho r (y'u) + rho ||y||^2 over r in R;
    # negative radii cover the other half circle. The constraint is
    # |r| >= r_min, so either the stationary radius is admissible or the
    # boundary point on one side wins.
    coef = mu + rho
    r_star = rho * yu / coef
    q_star = r_star * r_star * coef - 2.0 * rho * r_star * yu + y2
    q_pos = r_min * r_min * coef - 2.0 * rho * r_min * yu + y2
    q_neg = r_min * r_min * coef + 2.0 * rho * r_min * yu + y2
    q = np.where(np.abs(r_star) >= r_min, q_star, np.minimum(q_pos, q_neg))
    return float(np.min(q))


def sphere_grid_min(Q0: np.ndarray, Q1: np.ndarray, resolution: int = 400) -> float:
    """Grid lower envelope for min u'Q0u with u'Q1u <= -1 on the sphere.

    Supports orders 1 to 3. The returned value is the best feasible grid
    point, an upper bound on the true minimum that tightens as the grid
    refines; infeasible grids return +inf.
    """
    Q0 = np.asarray(Q0, dtype=np.float64)
    Q1 = np.asarray(Q1, dtype=np.float64)
    m = Q0.shape[0]
    if m == 1:
        if Q1[0, 0] <= -1.0:
            return float(Q0[0, 0])
        return np.inf
    if m == 2:
        thetas = np.linspace(0.0, np.pi, resolution * resolution, endpoint=False)
        u = np.stack([np.cos(thetas), np.sin(thetas)])
    elif m == 3:
        thetas = np.linspace(0.0, np.pi, resolution, endpoint=False)
        phis = np.linspace(0.0, 2.0 * np.pi, 2 * resolution, endpoint=False)
        tt, pp = np.meshgrid(thetas, phis, indexing="ij")
        u = np.stack(
            [
                (np.sin(tt) * np.cos(pp)).ravel(),
                (np.sin(tt) * np.sin(pp)).ravel(),
                np.cos(tt).ravel(),
            ]
        )
    else:
        raise ValueError(f"sphere grid supports orders 1-3, got {m}")
    # The sphere is a double cover under u -> -u and both quadratics are
    # even, so half the sphere suffices.
    v1 = np.einsum("ip,ij,jp->p", u, Q1, u)
    feas = v1 <= -1.0
    if not np.any(feas):
        return np.inf
    v0 = np.einsum("ip,ij,jp->p", u, Q0, u)
    return float(np.min(v0[feas]))


def exhaustive_best_support(
    inst: ProblemInstance,
) -> tuple[float, tuple[int, ...], RestrictedSolution | None]:
    """Global optimum over every size-k support by brute enumeration."""
    best = np.inf
    best_sup: tuple[int, ...] = ()
    best_sol: RestrictedSolution | None = None
    for sup in combinations(range(inst.n), inst.k):
        try:
            sol = solve_restricted(inst, sup)
        except Infeasible:
            continue
        if sol.value < best:
            best, best_sup, best_sol = sol.value, sup, sol
    return best, best_sup, best_sol
