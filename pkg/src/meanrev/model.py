"""Problem and solution types for sparse minimum-predictability selection.

The optimization problem throughout the package is

    minimize    x' M x
    subject to  x' A x >= phi,   ||x||_2 = 1,   ||x||_0 <= k,

with M the predictability matrix and A the covariance, both symmetric
positive definite. This module holds the validated containers plus the
first-order diagnostics evaluated on candidate points: least-squares KKT
multipliers and the regularity (constraint qualification) check used to
interpret them.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import Infeasible, InvalidIndexSet, InvalidInput
from .linalg import eig_sym, symmetrize

# A stationarity multiplier for the variance bound counts as active only
# inside this relative window; outside it lambda is clamped to zero.
ACTIVE_TOL = 1e-8
# Window in which the variance constraint is treated as binding for the
# regularity check and the active_constraint flag.
BINDING_TOL = 1e-6
UNIT_NORM_TOL = 1e-8
FEASIBILITY_TOL = 1e-8
SUPPORT_EIG_TOL = 1e-10
GRAM_TOL = 1e-10


def as_support(indices: Iterable[int], n: int) -> tuple[int, ...]:
    """Validate an index set against universe size n; returns it sorted."""
    idx = tuple(sorted(int(i) for i in indices))
    if not idx:
        raise InvalidIndexSet("support set is empty")
    if len(set(idx)) != len(idx):
        raise InvalidIndexSet(f"support set has repeated indices: {idx}")
    if idx[0] < 0 or idx[-1] >= n:
        raise InvalidIndexSet(f"support set {idx} out of range for n={n}")
    return idx


def pad_support(indices: Iterable[int], k: int, n: int) -> tuple[int, ...]:
    """Pad an index set to size k with the smallest unused indices."""
    base = set(int(i) for i in indices)
    if len(base) > k:
        raise InvalidIndexSet(f"cannot pad {len(base)} indices down to {k}")
    for i in range(n):
        if len(base) == k:
            break
        base.add(i)
    return as_support(base, n)


@dataclass(frozen=True)
class ProblemInstance:
    """Validated instance (M, A, phi, k); matrices are symmetrized copies."""

    M: np.ndarray
    A: np.ndarray
    phi: float
    k: int

    def __post_init__(self):
        m = symmetrize(self.M, "M")
        a = symmetrize(self.A, "A")
        if m.shape != a.shape:
            raise InvalidInput(f"M shape {m.shape} does not match A shape {a.shape}")
        for name, mat in (("M", m), ("A", a)):
            w = eig_sym(mat).values
            if w[0] <= SUPPORT_EIG_TOL * abs(w[-1]) or w[0] <= 0.0:
                raise InvalidInput(f"{name} is not positive definite enough")
        if not (self.phi > 0.0 and np.isfinite(self.phi)):
            raise InvalidInput(f"phi must be positive and finite, got {self.phi}")
        if not 1 <= self.k < m.shape[0]:
            raise InvalidInput(f"k must satisfy 1 <= k < n, got k={self.k} n={m.shape[0]}")
        object.__setattr__(self, "M", m)
        object.__setattr__(self, "A", a)
        object.__setattr__(self, "phi", float(self.phi))
        object.__setattr__(self, "k", int(self.k))

    @property
    def n(self) -> int:
        return self.M.shape[0]


@dataclass(frozen=True)
class KktCertificate:
    """Least-squares stationarity multipliers at a candidate point."""

    lam: float
    mu: float
    w: np.ndarray
    residual: float


@dataclass(frozen=True)
class PortfolioSolution:
    """Feasible k-sparse unit portfolio with first-order diagnostics."""

    x: np.ndarray
    support: tuple[int, ...]
    objective: float
    kkt_residual: float
    active_constraint: bool

    @classmethod
    def from_vector(
        cls,
        inst: ProblemInstance,
        x: np.ndarray,
        support: Sequence[int] | None = None,
    ) -> "PortfolioSolution":
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (inst.n,) or not np.all(np.isfinite(x)):
            raise InvalidInput(f"x must be a finite vector of length {inst.n}")
        norm = float(np.linalg.norm(x))
        if abs(norm - 1.0) > UNIT_NORM_TOL:
            raise InvalidInput(f"x has norm {norm:.12g}, not unit within {UNIT_NORM_TOL}")
        nonzeros = tuple(int(i) for i in np.flatnonzero(x != 0.0))
        if support is None:
            sup = pad_support(nonzeros, inst.k, inst.n)
        else:
            sup = as_support(support, inst.n)
        if len(sup) != inst.k:
            raise InvalidIndexSet(f"support size {len(sup)} does not equal k={inst.k}")
        if not set(nonzeros) <= set(sup):
            raise InvalidInput("x has nonzero entries outside the declared support")
        variance = float(x @ inst.A @ x)
        if variance < inst.phi - FEASIBILITY_TOL * inst.phi:
            raise Infeasible(
                f"variance {variance:.12g} violates the floor {inst.phi:.12g}"
            )
        cert = kkt_residual(inst, x, sup)
        active = abs(variance - inst.phi) <= BINDING_TOL * inst.phi
        return cls(
            x=x.copy(),
            support=sup,
            objective=float(x @ inst.M @ x),
            kkt_residual=cert.residual,
            active_constraint=active,
        )


def support_feasible(inst: ProblemInstance, indices: Iterable[int]) -> bool:
    """Whether some unit vector on the given support meets the variance floor.

    Equivalent to lambda_max(A_II) >= phi, compared with relative slack.
    The criterion is monotone under support inclusion by eigenvalue
    interlacing, so growing a feasible support keeps it feasible.
    """
    idx = as_support(indices, inst.n)
    sub = inst.A[np.ix_(idx, idx)]
    top = float(eig_sym(sub).values[-1])
    return top >= inst.phi * (1.0 - SUPPORT_EIG_TOL)


def _check_point(inst: ProblemInstance, x: np.ndarray, indices: Iterable[int]):
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (inst.n,) or not np.all(np.isfinite(x)):
        raise InvalidInput(f"x must be a finite vector of length {inst.n}")
    idx = as_support(indices, inst.n)
    norm = float(np.linalg.norm(x))
    if abs(norm - 1.0) > 1e-6:
        raise InvalidInput(f"x has norm {norm:.12g}, expected unit within 1e-6")
    mask = np.ones(inst.n, dtype=bool)
    mask[list(idx)] = False
    if np.any(x[mask] != 0.0):
        raise InvalidInput("x has nonzero entries off the given support")
    return x, idx


def kkt_residual(
    inst: ProblemInstance, x: np.ndarray, indices: Iterable[int]
) -> KktCertificate:
    """Best-fit stationarity multipliers and the residual they leave.

    Solves, in the least-squares sense over (lambda, mu),

        M x - lambda A x + mu x + w = 0,   w zero on the support,

    with lambda >= 0 and lambda clamped to zero when the variance bound is
    slack. Off-support rows are absorbed exactly by w, so the residual is
    the 2-norm of the support block.
    """
    x, idx = _check_point(inst, x, indices)
    mx = inst.M @ x
    ax = inst.A @ x
    sel = list(idx)
    mx_s = mx[sel]
    ax_s = ax[sel]
    x_s = x[sel]
    variance = float(x @ ax)

    def mu_only() -> tuple[float, float]:
        denom = float(x_s @ x_s)
        return 0.0, (-(float(x_s @ mx_s) / denom) if denom > 0.0 else 0.0)

    if variance > inst.phi * (1.0 + ACTIVE_TOL):
        lam, mu = mu_only()
    else:
        g00 = float(ax_s @ ax_s)
        g01 = float(ax_s @ -x_s)
        g11 = float(x_s @ x_s)
        det = g00 * g11 - g01 * g01
        if det <= GRAM_TOL * g00 * g11 or g00 == 0.0:
            lam, mu = mu_only()
        else:
            b0 = float(ax_s @ mx_s)
            b1 = float(-x_s @ mx_s)
            lam = (b0 * g11 - b1 * g01) / det
            mu = (g00 * b1 - g01 * b0) / det
            if lam < 0.0:
                lam, mu = mu_only()

    stationarity = mx - lam * ax + mu * x
    w = -stationarity
    w[sel] = 0.0
    residual = float(np.linalg.norm(stationarity[sel]))
    return KktCertificate(lam=lam, mu=mu, w=w, residual=residual)


def robinson_check(
    inst: ProblemInstance, x: np.ndarray, indices: Iterable[int]
) -> bool:
    """Regularity of the constraint system at x on the given support.

    With the variance bound slack the qualification always holds. When it
    binds, it reduces to linear independence of (A x) and x restricted to
    the support, tested through the normalized Gram determinant.
    """
    x, idx = _check_point(inst, x, indices)
    ax = inst.A @ x
    variance = float(x @ ax)
    if abs(variance - inst.phi) > BINDING_TOL * inst.phi:
        return True
    sel = list(idx)
    u = ax[sel]
    v = x[sel]
    uu = float(u @ u)
    vv = float(v @ v)
    if uu == 0.0 or vv == 0.0:
        return False
    det = uu * vv - float(u @ v) ** 2
    return det > GRAM_TOL * uu * vv
