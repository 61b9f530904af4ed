"""Global solver for the support-restricted subproblem.

Restricting the portfolio problem to a support I and eliminating the unit
constraint's scale gives the sphere-constrained pair

    minimize  u' Q0 u   subject to  u' Q1 u <= -1,  ||u||_2 = 1,

with Q0 = M_II positive definite and Q1 = -A_II / phi negative definite.
Despite being nonconvex, the problem is solved globally: its semidefinite
relaxation is tight, and the relaxation's dual collapses to maximizing the
scalar concave function

    h(y1) = -y1 + lambda_min(Q0 - y1 Q1),

by supergradient bisection. A primal matrix is recovered on the null space
of Z = Q0 - y1 Q1 - y2 I and reduced to rank one by trace-preserving
updates, which hands back a unit vector attaining the certified value.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterable

import numpy as np

from .errors import DegenerateFace, DualUnbounded, Infeasible, InvalidInput
from .linalg import eig_sym, fix_sign, symmetrize
from .model import ProblemInstance, as_support, support_feasible

# Width of the bisection interval around the dual maximizer at return.
DUAL_INTERVAL = 1e-10
# Bracket expansion beyond this magnitude means an unbounded dual.
DUAL_RANGE = 1e12
# Eigenvalues of Z at or below NULL_TOL * ||Z||_2 belong to the null space.
NULL_TOL = 1e-7
# |u' Q1 u + 1| below this counts as exactly on the constraint surface.
EXACT_HIT_TOL = 1e-12
CONSTRAINT_TOL = 1e-7
RANK_TOL = 1e-10
DEGENERACY_TOL = 1e-10


@dataclass(frozen=True)
class ReducedPair:
    """Sphere-form data (Q0, Q1) for one support, with provenance."""

    Q0: np.ndarray
    Q1: np.ndarray
    support: tuple[int, ...]
    phi: float

    def __post_init__(self):
        q0 = symmetrize(self.Q0, "Q0")
        q1 = symmetrize(self.Q1, "Q1")
        if q0.shape != q1.shape:
            raise InvalidInput("Q0 and Q1 must have matching shapes")
        if eig_sym(q0).values[0] <= 0.0:
            raise InvalidInput("Q0 must be positive definite")
        if eig_sym(q1).values[-1] >= 0.0:
            raise InvalidInput("Q1 must be negative definite")
        object.__setattr__(self, "Q0", q0)
        object.__setattr__(self, "Q1", q1)

    @property
    def order(self) -> int:
        return self.Q0.shape[0]


@dataclass(frozen=True)
class DualCertificate:
    """Optimal scalar dual pair (y1, y2) with the value it certifies."""

    y1: float
    y2: float
    dual_value: float
    gap: float
    active: bool


@dataclass(frozen=True)
class PsdSolution:
    """Unit-trace PSD matrix solving the relaxed subproblem."""

    Y: np.ndarray
    rank: int

    def __post_init__(self):
        y = symmetrize(self.Y, "Y")
        if abs(float(np.trace(y)) - 1.0) > 1e-8:
            raise InvalidInput(f"trace {np.trace(y):.12g} is not 1 within 1e-8")
        if eig_sym(y).values[0] < -1e-8:
            raise InvalidInput("Y has an eigenvalue below -1e-8")
        object.__setattr__(self, "Y", y)


@dataclass(frozen=True)
class RestrictedSolution:
    """Globally optimal portfolio on one support, embedded in R^n."""

    x: np.ndarray
    value: float
    certificate: DualCertificate
    support: tuple[int, ...]


def restrict(inst: ProblemInstance, indices: Iterable[int]) -> ReducedPair:
    """Reduce the instance to a support; raises Infeasible if it cannot
    meet the variance floor."""
    idx = as_support(indices, inst.n)
    if not support_feasible(inst, idx):
        raise Infeasible(f"support {idx} cannot reach the variance floor")
    sel = np.ix_(idx, idx)
    return ReducedPair(
        Q0=inst.M[sel], Q1=-inst.A[sel] / inst.phi, support=idx, phi=inst.phi
    )


def _min_eig_dir(q0: np.ndarray, q1: np.ndarray, y1: float):
    w, v = eig_sym(q0 - y1 * q1)
    bottom = v[:, 0]
    return float(w[0]), float(-1.0 - bottom @ q1 @ bottom)


def dual_maximize(pair: ReducedPair, inequality: bool = False) -> DualCertificate:
    """Maximize h(y1) = -y1 + lambda_min(Q0 - y1 Q1) by supergradient
    bisection.

    By default y1 ranges over all reals (equality form of the variance
    constraint); with ``inequality`` it is kept nonnegative and the
    certificate's ``active`` flag records whether the constraint binds.
    Expansion past |y1| = 1e12 raises DualUnbounded, which signals that the
    equality form is infeasible on this support.
    """
    q0, q1 = pair.Q0, pair.Q1

    def certificate(y1: float, active: bool) -> DualCertificate:
        y2, _ = _min_eig_dir(q0, q1, y1)
        return DualCertificate(
            y1=y1, y2=y2, dual_value=-y1 + y2, gap=0.0, active=active
        )

    lo, hi = -1.0, 1.0
    if inequality:
        _, s0 = _min_eig_dir(q0, q1, 0.0)
        if s0 <= 0.0:
            return certificate(0.0, active=False)
        lo = 0.0
    _, s_lo = _min_eig_dir(q0, q1, lo)
    while s_lo < 0.0:
        lo *= 2.0
        if abs(lo) > DUAL_RANGE:
            raise DualUnbounded("dual ascent diverged toward -inf")
        _, s_lo = _min_eig_dir(q0, q1, lo)
    if s_lo == 0.0:
        return certificate(lo, active=not inequality or lo > 0.0)
    _, s_hi = _min_eig_dir(q0, q1, hi)
    while s_hi > 0.0:
        hi *= 2.0
        if hi > DUAL_RANGE:
            raise DualUnbounded("dual ascent diverged toward +inf")
        _, s_hi = _min_eig_dir(q0, q1, hi)
    if s_hi == 0.0:
        return certificate(hi, active=True)
    while hi - lo > DUAL_INTERVAL:
        mid = 0.5 * (lo + hi)
        _, s = _min_eig_dir(q0, q1, mid)
        if s > 0.0:
            lo = mid
        elif s < 0.0:
            hi = mid
        else:
            lo = hi = mid
    y1 = 0.5 * (lo + hi)
    return certificate(y1, active=not inequality or y1 > 0.0)


def _face_directions(q1: np.ndarray, basis: np.ndarray):
    """Diagonalize Q1 on a face basis: directions u_i with values b_i."""
    b = symmetrize(basis.T @ q1 @ basis)
    vals, vecs = eig_sym(b)
    dirs = basis @ vecs
    return vals, dirs


def _kink_blend(pair: ReducedPair, cert: DualCertificate) -> PsdSolution | None:
    """Bracket the constraint surface by probing both sides of the kink.

    Near a kink of the dual the bottom eigenvector switches branches, and
    rounding can leave every direction extracted at y1 itself strictly on
    one side of the surface. The branch vectors just left and right of y1
    straddle it, and their blend keeps both traces exact; the certified
    gap still measures whatever suboptimality the probe introduced.
    """
    base = DUAL_INTERVAL * max(1.0, abs(cert.y1))
    for mul in (1.0, 1e2, 1e4, 1e6):
        d = base * mul
        wi, vi = eig_sym(pair.Q0 - (cert.y1 - d) * pair.Q1)
        wj, vj = eig_sym(pair.Q0 - (cert.y1 + d) * pair.Q1)
        ui, uj = vi[:, 0], vj[:, 0]
        bi = float(ui @ pair.Q1 @ ui)
        bj = float(uj @ pair.Q1 @ uj)
        if bi <= -1.0 <= bj and bi < bj:
            t = (-1.0 - bj) / (bi - bj)
            ui = fix_sign(ui)
            uj = fix_sign(uj)
            return PsdSolution(
                Y=t * np.outer(ui, ui) + (1.0 - t) * np.outer(uj, uj), rank=2
            )
    return None


def recover_primal(
    pair: ReducedPair, cert: DualCertificate, null_tol: float = NULL_TOL
) -> PsdSolution:
    """Primal matrix supported on the null space of Z = Q0 - y1 Q1 - y2 I.

    A rank-one Y = v v' is returned when some null direction lands on the
    constraint surface; otherwise two null directions whose Q1-values
    bracket -1 are blended so the trace conditions hold exactly. If the
    face contains no such directions, DegenerateFace is raised and the
    caller may retry once with a wider ``null_tol``.
    """
    z = pair.Q0 - cert.y1 * pair.Q1 - cert.y2 * np.eye(pair.order)
    w, v = eig_sym(z)
    # Z itself is near zero when the whole face is null, so measure the
    # tolerance against the shifted matrix Q0 - y1 Q1 whose bottom
    # eigenspace is being extracted.
    scale = float(np.max(np.abs(w + cert.y2)))
    d = max(1, int(np.sum(w <= null_tol * scale)))
    basis = v[:, :d]
    vals, dirs = _face_directions(pair.Q1, basis)

    exact = np.flatnonzero(np.abs(vals + 1.0) <= EXACT_HIT_TOL * max(1.0, np.max(np.abs(vals))))
    if exact.size:
        u = fix_sign(dirs[:, exact[0]])
        return PsdSolution(Y=np.outer(u, u), rank=1)

    if cert.active:
        below = np.flatnonzero(vals <= -1.0)
        above = np.flatnonzero(vals >= -1.0)
        if below.size and above.size:
            i, j = int(below[-1]), int(above[0])
            t = (-1.0 - vals[j]) / (vals[i] - vals[j])
            ui = fix_sign(dirs[:, i])
            uj = fix_sign(dirs[:, j])
            return PsdSolution(Y=t * np.outer(ui, ui) + (1.0 - t) * np.outer(uj, uj), rank=2)
        near = np.flatnonzero(np.abs(vals + 1.0) <= CONSTRAINT_TOL)
        if near.size:
            u = fix_sign(dirs[:, near[0]])
            return PsdSolution(Y=np.outer(u, u), rank=1)
        blended = _kink_blend(pair, cert)
        if blended is not None:
            return blended
        raise DegenerateFace(
            "no null directions bracket the constraint surface", basis=basis
        )

    if vals[0] <= -1.0 + CONSTRAINT_TOL:
        u = fix_sign(dirs[:, 0])
        return PsdSolution(Y=np.outer(u, u), rank=1)
    raise DegenerateFace("face contains no feasible direction", basis=basis)


def _null_direction(row_a: np.ndarray, row_b: np.ndarray) -> np.ndarray:
    """Deterministic null vector of a 2 x m system by pivoted elimination.

    Takes the free column of smallest basis index, sets it to one, solves
    for the pivot entries, and orients the result so its first nonzero
    coordinate is positive.
    """
    c = np.vstack([row_a, row_b]).astype(np.float64)
    m = c.shape[1]
    eps = 1e-13 * max(1.0, float(np.max(np.abs(c))))
    pivots: list[tuple[int, int]] = []
    r = 0
    for col in range(m):
        if r >= 2:
            break
        pr = r + int(np.argmax(np.abs(c[r:, col])))
        if abs(c[pr, col]) <= eps:
            continue
        if pr != r:
            c[[r, pr]] = c[[pr, r]]
        for rr in range(2):
            if rr != r and c[rr, col] != 0.0:
                c[rr] -= (c[rr, col] / c[r, col]) * c[r]
        pivots.append((r, col))
        r += 1
    pivot_cols = {col for _, col in pivots}
    free = next(col for col in range(m) if col not in pivot_cols)
    delta = np.zeros(m)
    delta[free] = 1.0
    for prow, pcol in pivots:
        delta[pcol] = -c[prow, free] / c[prow, pcol]
    first = np.flatnonzero(delta)[0]
    if delta[first] < 0.0:
        delta = -delta
    return delta


def _assemble_symmetric(delta: np.ndarray, r: int) -> np.ndarray:
    out = np.zeros((r, r))
    for p in range(r):
        out[p, p] = delta[p]
    pos = r
    for i in range(r):
        for j in range(i + 1, r):
            out[i, j] = out[j, i] = delta[pos]
            pos += 1
    return out


def rank_reduce(sol: PsdSolution, q1: np.ndarray) -> PsdSolution:
    """Reduce a PSD solution to rank one, preserving Tr(Y) and Tr(Q1 Y).

    Each pass factors Y = V V', finds a nonzero symmetric direction whose
    weighted traces against V'V and V'Q1 V both vanish, and steps to the
    boundary of the PSD cone along it; directions supported on the optimal
    face also leave Tr(Q0 Y) unchanged.
    """
    q1 = symmetrize(q1, "Q1")
    w, v = eig_sym(sol.Y)
    top = float(w[-1])
    keep = w > RANK_TOL * top
    factor = v[:, keep] * np.sqrt(w[keep])
    while factor.shape[1] > 1:
        r = factor.shape[1]
        gram = factor.T @ factor
        h = symmetrize(factor.T @ q1 @ factor)
        m = r * (r + 1) // 2
        row_a = np.empty(m)
        row_b = np.empty(m)
        row_a[:r] = np.diag(gram)
        row_b[:r] = np.diag(h)
        pos = r
        for i in range(r):
            for j in range(i + 1, r):
                row_a[pos] = 2.0 * gram[i, j]
                row_b[pos] = 2.0 * h[i, j]
                pos += 1
        delta = _assemble_symmetric(_null_direction(row_a, row_b), r)
        dvals, dvecs = eig_sym(delta)
        dmax = float(dvals[-1])
        if dmax <= 0.0:
            delta = -delta
            dvals, dvecs = eig_sym(delta)
            dmax = float(dvals[-1])
        scal = 1.0 - dvals / dmax
        keep = scal > 1e-12 * float(scal[0])
        factor = (factor @ dvecs)[:, keep] * np.sqrt(scal[keep])
    u = fix_sign(factor[:, 0])
    return PsdSolution(Y=np.outer(u, u), rank=1)


def _restore_constraint(pair: ReducedPair, u: np.ndarray) -> np.ndarray:
    """Pull a boundary solution back onto the feasible side exactly.

    Rank-one extraction can leave u' Q1 u a few ulps above -1 at poorly
    scaled supports. A Newton step along the tangential gradient of the
    constraint restores it to working precision while moving u by O(that
    violation), and the objective is recomputed from the returned vector.
    """
    for _ in range(3):
        c = float(u @ pair.Q1 @ u)
        if c <= -1.0:
            break
        if c > -1.0 + 1e-6 * max(1.0, abs(c)):
            break  # not a rounding-scale violation; leave it to the caller
        g = pair.Q1 @ u - c * u
        gnorm2 = float(g @ g)
        if gnorm2 <= 0.0:
            break
        u = u + ((-1.0 - c) / (2.0 * gnorm2)) * g
        u = u / np.linalg.norm(u)
    return u


def _feasible_bottom_direction(pair: ReducedPair) -> tuple[np.ndarray | None, float]:
    """A unit minimizer of u'Q0 u on the sphere that meets the constraint.

    Searches the bottom eigenspace of Q0: each basis vector first, then the
    eigenspace direction with the most negative Q1-value. Returns (vector
    or None, lambda_min(Q0))."""
    w, v = eig_sym(pair.Q0)
    lam0 = float(w[0])
    span = v[:, np.flatnonzero(w <= lam0 + DEGENERACY_TOL * max(1.0, abs(lam0)))]
    for i in range(span.shape[1]):
        u = span[:, i]
        if float(u @ pair.Q1 @ u) <= -1.0 + DEGENERACY_TOL:
            return fix_sign(u), lam0
    if span.shape[1] > 1:
        vals, dirs = _face_directions(pair.Q1, span)
        if vals[0] <= -1.0 + DEGENERACY_TOL:
            return fix_sign(dirs[:, 0]), lam0
    return None, lam0


def solve_restricted(inst: ProblemInstance, indices: Iterable[int]) -> RestrictedSolution:
    """Global minimum of the portfolio objective on a fixed support.

    Tries the unconstrained sphere minimizer first (valid whenever some
    bottom eigenvector of Q0 already meets the variance floor), otherwise
    takes the semidefinite route: scalar dual ascent, face recovery, and
    rank reduction. The returned certificate has gap <= 1e-6 scaled.
    """
    pair = restrict(inst, indices)
    shortcut, lam0 = _feasible_bottom_direction(pair)

    u = None
    u_val = np.inf
    cert = None
    try:
        cert = dual_maximize(pair)
        try:
            psd = recover_primal(pair, cert)
        except DegenerateFace:
            psd = recover_primal(pair, cert, null_tol=NULL_TOL * 10.0)
        if psd.rank > 1:
            psd = rank_reduce(psd, pair.Q1)
        vals, vecs = eig_sym(psd.Y)
        u = fix_sign(_restore_constraint(pair, vecs[:, -1]))
        u_val = float(u @ pair.Q0 @ u)
    except DualUnbounded:
        if shortcut is None:
            raise Infeasible(
                f"support {pair.support} admits no feasible direction"
            ) from None

    if shortcut is not None and (u is None or lam0 < u_val):
        chosen = shortcut
        value = float(chosen @ pair.Q0 @ chosen)
        out_cert = DualCertificate(
            y1=0.0,
            y2=lam0,
            dual_value=lam0,
            gap=max(value - lam0, 0.0),
            active=False,
        )
    else:
        chosen = u
        value = u_val
        out_cert = replace(cert, gap=max(value - cert.dual_value, 0.0))

    x = np.zeros(inst.n)
    x[list(pair.support)] = chosen
    return RestrictedSolution(x=x, value=value, certificate=out_cert, support=pair.support)
