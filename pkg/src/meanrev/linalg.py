"""Dense symmetric linear algebra used by the solvers.

Everything here is deliberately small and deterministic: a cyclic Jacobi
eigensolver, an unpivoted Cholesky factorization with an explicit pivot
threshold, and the smallest eigenvalue of a symmetric-positive-definite
pencil (P, A) computed through the Cholesky whitening A = L L^T.

The kernels are plain loops compiled with numba when it is available; the
same functions run un-jitted otherwise. Results are identical run to run
on a given install, which the rest of the package relies on.
"""
from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .errors import ConvergenceFailure, InvalidMatrix, NotPositiveDefinite

# Relative off-diagonal threshold for Jacobi convergence.
JACOBI_TOL = 1e-12
JACOBI_MAX_SWEEPS = 100
# A Cholesky pivot at or below this fraction of max|m| means "not PD".
CHOLESKY_PIVOT_TOL = 1e-12

try:
    from numba import njit

    def _jit(fn):
        return njit(cache=True, nogil=True)(fn)

except ImportError:  # pragma: no cover - numba is a declared dependency

    def _jit(fn):
        return fn


class EigResult(NamedTuple):
    values: np.ndarray
    vectors: np.ndarray


def _jacobi_sweeps(a, v, tol, max_sweeps):
    """Cyclic Jacobi rotations in place. Returns sweeps used, or -1."""
    n = a.shape[0]
    for sweep in range(max_sweeps + 1):
        off = 0.0
        for p in range(n - 1):
            for q in range(p + 1, n):
                off += 2.0 * a[p, q] * a[p, q]
        if np.sqrt(off) <= tol:
            return sweep
        if sweep == max_sweeps:
            return -1
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if theta >= 0.0:
                    t = 1.0 / (theta + np.sqrt(1.0 + theta * theta))
                else:
                    t = -1.0 / (-theta + np.sqrt(1.0 + theta * theta))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                a[p, p] = a[p, p] - t * apq
                a[q, q] = a[q, q] + t * apq
                a[p, q] = 0.0
                a[q, p] = 0.0
                for i in range(n):
                    if i != p and i != q:
                        aip = a[i, p]
                        aiq = a[i, q]
                        a[i, p] = c * aip - s * aiq
                        a[p, i] = a[i, p]
                        a[i, q] = s * aip + c * aiq
                        a[q, i] = a[i, q]
                for i in range(n):
                    vip = v[i, p]
                    viq = v[i, q]
                    v[i, p] = c * vip - s * viq
                    v[i, q] = s * vip + c * viq
    return -1


def _cholesky_inplace(m, pivot_tol):
    """Lower Cholesky factor in place (lower triangle). Returns 1 if PD."""
    n = m.shape[0]
    for j in range(n):
        d = m[j, j]
        for k in range(j):
            d -= m[j, k] * m[j, k]
        if d <= pivot_tol:
            return 0
        d = np.sqrt(d)
        m[j, j] = d
        for i in range(j + 1, n):
            s = m[i, j]
            for k in range(j):
                s -= m[i, k] * m[j, k]
            m[i, j] = s / d
    for j in range(n):
        for i in range(j + 1, n):
            m[j, i] = 0.0
    return 1


def _forward_sub(lo, b, out):
    """Solve lo @ out = b for lower-triangular lo; b, out 1-D."""
    n = lo.shape[0]
    for i in range(n):
        s = b[i]
        for k in range(i):
            s -= lo[i, k] * out[k]
        out[i] = s / lo[i, i]


def _back_sub(lo, b, out):
    """Solve lo.T @ out = b for lower-triangular lo; b, out 1-D."""
    n = lo.shape[0]
    for i in range(n - 1, -1, -1):
        s = b[i]
        for k in range(i + 1, n):
            s -= lo[k, i] * out[k]
        out[i] = s / lo[i, i]


def _forward_sub_mat(lo, b, out):
    """Solve lo @ out = b columnwise for a matrix right-hand side."""
    n = lo.shape[0]
    m = b.shape[1]
    for j in range(m):
        for i in range(n):
            s = b[i, j]
            for k in range(i):
                s -= lo[i, k] * out[k, j]
            out[i, j] = s / lo[i, i]


_jacobi_sweeps = _jit(_jacobi_sweeps)
_cholesky_inplace = _jit(_cholesky_inplace)
_forward_sub = _jit(_forward_sub)
_back_sub = _jit(_back_sub)
_forward_sub_mat = _jit(_forward_sub_mat)


def _check_square(a: np.ndarray, name: str) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InvalidMatrix(f"{name} must be a square 2-D array, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidMatrix(f"{name} contains non-finite entries")
    return a


def symmetrize(a: np.ndarray, name: str = "matrix") -> np.ndarray:
    """Validate a square finite matrix and return (a + a.T) / 2."""
    a = _check_square(a, name)
    scale = 1.0 + np.max(np.abs(a)) if a.size else 1.0
    if np.max(np.abs(a - a.T)) > 1e-8 * scale:
        raise InvalidMatrix(f"{name} is not symmetric within tolerance")
    return (a + a.T) / 2.0


def eig_sym(a: np.ndarray) -> EigResult:
    """Full eigendecomposition of a symmetric matrix by cyclic Jacobi.

    Returns eigenvalues ascending (stable order for ties) and orthonormal
    eigenvectors as columns, with a = V diag(w) V^T to working precision.
    """
    a = symmetrize(a, "eig_sym input")
    n = a.shape[0]
    if n == 1:
        return EigResult(a[0].copy(), np.ones((1, 1)))
    work = np.ascontiguousarray(a)
    if work is a:
        work = a.copy()
    vec = np.eye(n)
    tol = JACOBI_TOL * np.sqrt(np.sum(a * a))
    sweeps = _jacobi_sweeps(work, vec, tol, JACOBI_MAX_SWEEPS)
    if sweeps < 0:
        raise ConvergenceFailure(
            f"Jacobi did not reach off-norm {tol:.3e} in {JACOBI_MAX_SWEEPS} sweeps"
        )
    values = np.diag(work).copy()
    order = np.argsort(values, kind="stable")
    return EigResult(values[order], vec[:, order])


def cholesky(m: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor of an SPD matrix.

    Raises NotPositiveDefinite when a pivot is <= 1e-12 * max|m|.
    """
    m = symmetrize(m, "cholesky input")
    work = m.copy()
    pivot_tol = CHOLESKY_PIVOT_TOL * (np.max(np.abs(m)) if m.size else 1.0)
    if not _cholesky_inplace(work, pivot_tol):
        raise NotPositiveDefinite(
            f"Cholesky pivot at or below {pivot_tol:.3e}; matrix is not PD"
        )
    return work


def solve_cholesky(lo: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve (L L^T) x = b given a lower Cholesky factor."""
    y = np.empty_like(b)
    x = np.empty_like(b)
    _forward_sub(lo, b, y)
    _back_sub(lo, y, x)
    return x


def solve_spd(m: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve m x = b for SPD m via Cholesky plus one refinement step."""
    m = symmetrize(m, "solve_spd matrix")
    b = np.asarray(b, dtype=np.float64)
    if b.shape != (m.shape[0],):
        raise InvalidMatrix(f"right-hand side shape {b.shape} does not match {m.shape}")
    if not np.all(np.isfinite(b)):
        raise InvalidMatrix("right-hand side contains non-finite entries")
    lo = cholesky(m)
    x = solve_cholesky(lo, b)
    x = x + solve_cholesky(lo, b - m @ x)
    return x


def _whitened(p: np.ndarray, a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Return (L, B) with a = L L^T and B = L^-1 p L^-T symmetrized."""
    p = symmetrize(p, "pencil p")
    a = symmetrize(a, "pencil a")
    if p.shape != a.shape:
        raise InvalidMatrix("pencil matrices must have matching shapes")
    lo = cholesky(a)
    y = np.empty_like(p)
    _forward_sub_mat(lo, p, y)
    z = np.empty_like(p)
    _forward_sub_mat(lo, np.ascontiguousarray(y.T), z)
    b = z.T
    return lo, (b + b.T) / 2.0


def pencil_min_eig(p: np.ndarray, a: np.ndarray) -> float:
    """Smallest generalized eigenvalue of p x = mu a x with a SPD."""
    _, b = _whitened(p, a)
    return float(eig_sym(b).values[0])


def pencil_min_eigpair(p: np.ndarray, a: np.ndarray) -> tuple[float, np.ndarray]:
    """Smallest pencil eigenvalue with its unit eigenvector u: p u = mu a u.

    The eigenvector is normalized to unit 2-norm with its first
    non-negligible coordinate positive.
    """
    lo, b = _whitened(p, a)
    values, vectors = eig_sym(b)
    v = vectors[:, 0]
    u = np.empty_like(v)
    _back_sub(lo, v, u)
    u = u / np.linalg.norm(u)
    return float(values[0]), fix_sign(u)


def fix_sign(u: np.ndarray) -> np.ndarray:
    """Flip u so its first coordinate above 1e-12 * max|u| is positive."""
    mx = np.max(np.abs(u))
    if mx == 0.0:
        return u
    idx = np.flatnonzero(np.abs(u) > 1e-12 * mx)
    if idx.size and u[idx[0]] < 0.0:
        return -u
    return u
