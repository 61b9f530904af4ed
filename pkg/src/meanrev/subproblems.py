"""Block subproblems for the penalty decomposition stage.

The penalty objective q_rho(x, y) = x' M x + rho ||x - y||^2 is minimized
alternately in x and y:

* the y-block restricts y to unit k-sparse vectors and has the closed form
  "keep the k largest magnitudes of x and renormalize";
* the x-block keeps the volatility floor x' A x >= phi and is solved
  exactly through its one-dimensional concave dual

      g(w) = rho ||y||^2 + w phi - rho^2 y' (M + rho I - w A)^{-1} y

  on [0, w_bar), where w_bar is the smallest eigenvalue of the pencil
  (M + rho I, A). The secular function h(w) = x(w)' A x(w) - phi is
  increasing and convex there, so safeguarded Newton from w = 0 converges
  monotonically. When y has no component along the pencil's bottom
  eigenvector the boundary may be unreachable (hard case) and the solution
  gains a correction along that eigenvector.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    ConvergenceFailure,
    InvalidInput,
    NotPositiveDefinite,
    ZeroVector,
)
from .linalg import cholesky, pencil_min_eig, pencil_min_eigpair, solve_cholesky

# Accept the root of the secular equation when |h| <= SECULAR_TOL * phi.
SECULAR_TOL = 1e-10
MAX_ROOT_ITER = 200
# Stay this fraction away from the pencil bound when bracketing.
EDGE_MARGIN = 1e-8


@dataclass(frozen=True)
class SparseProjection:
    """Unit k-sparse y closest to x, with the support that was kept."""

    y: np.ndarray
    support: tuple[int, ...]


@dataclass(frozen=True)
class PxResult:
    """Solution of the x-block with its dual certificate."""

    x: np.ndarray
    lam: float
    objective: float
    dual_value: float
    gap: float
    iterations: int
    hard_case: bool


def top_k_support(x: np.ndarray, k: int) -> tuple[int, ...]:
    """Indices of the k largest |x_i|, ties to the lower index; sorted."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise InvalidInput("x must be a 1-D vector")
    if not 1 <= k <= x.size:
        raise InvalidInput(f"k must be in [1, {x.size}], got {k}")
    order = np.argsort(-np.abs(x), kind="stable")
    return tuple(sorted(int(i) for i in order[:k]))


def solve_py(x: np.ndarray, k: int) -> SparseProjection:
    """Closest unit k-sparse vector to x.

    Keeps the top-k magnitudes of x (ties to the lower index) and
    renormalizes. A zero input has no closest point and raises ZeroVector;
    if the kept block is zero anyway the first kept coordinate is used.
    """
    x = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise InvalidInput("x contains non-finite entries")
    if np.all(x == 0.0):
        raise ZeroVector("cannot project the zero vector to the unit sphere")
    support = top_k_support(x, k)
    sel = list(support)
    y = np.zeros_like(x)
    block = x[sel]
    norm = float(np.linalg.norm(block))
    if norm > 0.0:
        y[sel] = block / norm
    else:
        y[support[0]] = 1.0
    return SparseProjection(y=y, support=support)


def penalty_value(M: np.ndarray, rho: float, x: np.ndarray, y: np.ndarray) -> float:
    """q_rho(x, y) = x' M x + rho ||x - y||^2."""
    d = x - y
    return float(x @ M @ x + rho * (d @ d))


def _positive_root(a: float, b: float, c: float) -> float:
    """Positive root of a t^2 + b t + c with a > 0 > c, computed stably."""
    disc = np.sqrt(b * b - 4.0 * a * c)
    if b <= 0.0:
        return (-b + disc) / (2.0 * a)
    return (2.0 * -c) / (b + disc)


def solve_px(
    M: np.ndarray,
    A: np.ndarray,
    rho: float,
    y: np.ndarray,
    phi: float,
    pencil_bound: float | None = None,
    max_iter: int = MAX_ROOT_ITER,
) -> PxResult:
    """Exact minimizer of q_rho(., y) over the set x' A x >= phi.

    ``pencil_bound`` lets callers reuse the pencil eigenvalue of
    (M + rho I, A), which is constant across an inner loop at fixed rho.
    """
    M = np.asarray(M, dtype=np.float64)
    A = np.asarray(A, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if not np.all(np.isfinite(y)):
        raise InvalidInput("y contains non-finite entries")
    if not (rho > 0.0 and np.isfinite(rho)):
        raise InvalidInput(f"rho must be positive, got {rho}")
    if not (phi > 0.0 and np.isfinite(phi)):
        raise InvalidInput(f"phi must be positive, got {phi}")

    n = y.size
    shifted = M + rho * np.eye(n)
    rho_y = rho * y
    y_sq = float(y @ y)

    def evaluate(w: float):
        """x(w), its A-value, and h'(w) for the shifted system."""
        lo = cholesky(shifted - w * A)
        x_w = solve_cholesky(lo, rho_y)
        x_w = x_w + solve_cholesky(lo, rho_y - (shifted - w * A) @ x_w)
        ax = A @ x_w
        slope = 2.0 * float(ax @ solve_cholesky(lo, ax))
        return x_w, float(x_w @ ax), slope

    def finish(x: np.ndarray, lam: float, iterations: int, hard: bool) -> PxResult:
        objective = penalty_value(M, rho, x, y)
        # rho^2 y' P^{-1} y = rho y' x(w) for the regular solution path.
        dual = rho * y_sq + lam * phi - rho * float(y @ x)
        return PxResult(
            x=x,
            lam=lam,
            objective=objective,
            dual_value=dual,
            gap=max(objective - dual, 0.0),
            iterations=iterations,
            hard_case=hard,
        )

    x0, val0, slope0 = evaluate(0.0)
    if val0 >= phi:
        return finish(x0, 0.0, 0, False)

    w_bar = pencil_min_eig(shifted, A) if pencil_bound is None else float(pencil_bound)
    hi = w_bar * (1.0 - EDGE_MARGIN)
    x_hi = None
    for _ in range(8):
        try:
            x_hi, val_hi, _ = evaluate(hi)
            break
        except NotPositiveDefinite:
            hi *= 1.0 - 1e-6
    if x_hi is None:
        raise ConvergenceFailure("could not factor the shifted system near the pencil bound")

    if val_hi < phi:
        # Hard case: the boundary is unreachable along the regular path; add
        # the pencil's bottom eigenvector to land exactly on it.
        _, u = pencil_min_eigpair(shifted, A)
        au = A @ u
        tau = _positive_root(float(u @ au), 2.0 * float(u @ (A @ x_hi)), val_hi - phi)
        x = x_hi + tau * u
        res = finish(x, hi, 0, True)
        # The regular-path dual formula does not apply; recompute g directly.
        dual = rho * y_sq + hi * phi - rho * float(y @ x_hi)
        return PxResult(
            x=res.x,
            lam=res.lam,
            objective=res.objective,
            dual_value=dual,
            gap=max(res.objective - dual, 0.0),
            iterations=res.iterations,
            hard_case=True,
        )

    lo_w, hi_w = 0.0, hi
    w, x_w, val, slope = 0.0, x0, val0, slope0
    for iteration in range(1, max_iter + 1):
        h = val - phi
        if abs(h) <= SECULAR_TOL * phi:
            return finish(x_w, w, iteration - 1, False)
        if h < 0.0:
            lo_w = w
        else:
            hi_w = w
        if slope <= 0.0:
            w_next = 0.5 * (lo_w + hi_w)
        else:
            w_next = w - h / slope
            if not lo_w < w_next < hi_w:
                w_next = 0.5 * (lo_w + hi_w)
        try:
            x_w, val, slope = evaluate(w_next)
            w = w_next
        except NotPositiveDefinite:
            hi_w = w_next
            w = 0.5 * (lo_w + hi_w)
            x_w, val, slope = evaluate(w)

    raise ConvergenceFailure(
        f"secular iteration did not converge in {max_iter} steps",
        best=finish(x_w, w, max_iter, False),
    )
