"""Shared oracle helpers for the test suite.

These deliberately avoid the library's own linear algebra: the
characteristic polynomial comes from the Faddeev-LeVerrier recurrence
and the pencil eigenvalue from determinant-sign bisection, so they can
referee the implementations without sharing code with them.
"""
from __future__ import annotations

import numpy as np


def char_poly_coeffs(a: np.ndarray) -> np.ndarray:
    """Coefficients of det(tI - A), highest power first (Faddeev-LeVerrier)."""
    n = a.shape[0]
    coeffs = np.zeros(n + 1)
    coeffs[0] = 1.0
    m = np.zeros_like(a)
    for k in range(1, n + 1):
        m = a @ m + coeffs[k - 1] * np.eye(n)
        coeffs[k] = -np.trace(a @ m) / k
    return coeffs


def poly_eval(coeffs: np.ndarray, t: float) -> float:
    acc = 0.0
    for c in coeffs:
        acc = acc * t + c
    return float(acc)


def _count_eigs_below(p: np.ndarray, a: np.ndarray, w: float) -> int:
    """Number of pencil eigenvalues of (P, A) strictly below w.

    Equals the negative-eigenvalue count of P - wA (Sylvester congruence
    through the Cholesky factor of A), read off as sign alternations in
    the leading principal minors (Jacobi's determinant theorem). A zero
    minor means w sits too close to an eigenvalue; the caller retries at
    a nudged point.
    """
    m = p - w * a
    n = m.shape[0]
    signs = [1.0]
    for size in range(1, n + 1):
        sign, _ = np.linalg.slogdet(m[:size, :size])
        if sign == 0.0:
            raise ArithmeticError("singular leading minor")
        signs.append(float(sign))
    return sum(1 for s, t in zip(signs, signs[1:]) if s != t)


def pencil_min_eig_bisect(p: np.ndarray, a: np.ndarray, tol: float = 1e-13) -> float:
    """Smallest generalized eigenvalue of (P, A) by inertia bisection.

    Only determinant signs of shifted matrices are used, so this shares
    nothing with an iterative eigenvalue routine. Robust to clustered
    eigenvalues, unlike a sign-change walk on det alone.
    """

    def count(w: float) -> int:
        for nudge in (0.0, 1e-12, -1e-12, 1e-9, -1e-9):
            try:
                return _count_eigs_below(p, a, w * (1.0 + nudge) + nudge)
            except ArithmeticError:
                continue
        raise AssertionError(f"could not count eigenvalues at w={w}")

    a_min = float(np.linalg.eigvalsh(a).min())
    bound = float(np.linalg.norm(p, 2)) / a_min + 1.0
    lower, upper = -bound, bound
    assert count(lower) == 0 and count(upper) >= 1
    for _ in range(200):
        mid = 0.5 * (lower + upper)
        if count(mid) == 0:
            lower = mid
        else:
            upper = mid
        if upper - lower <= tol * max(1.0, abs(upper)):
            break
    return 0.5 * (lower + upper)
