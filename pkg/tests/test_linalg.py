"""Dense symmetric eigensolver, Cholesky stack, and pencil routines."""
from __future__ import annotations

import numpy as np
import pytest
from conftest import char_poly_coeffs, pencil_min_eig_bisect, poly_eval

from meanrev.errors import InvalidInput, InvalidMatrix, NotPositiveDefinite
from meanrev.linalg import (
    cholesky,
    eig_sym,
    fix_sign,
    pencil_min_eig,
    pencil_min_eigpair,
    solve_cholesky,
    solve_spd,
    symmetrize,
)
from meanrev.synthetic import random_spd


def test_eig_sym_roots_of_characteristic_polynomial():
    # every reported eigenvalue must annihilate the char poly built by an
    # independent recurrence
    rng = np.random.default_rng(0)
    for _ in range(50):
        n = int(rng.integers(1, 9))
        a = rng.standard_normal((n, n))
        a = (a + a.T) / 2.0
        coeffs = char_poly_coeffs(a)
        res = eig_sym(a)
        scale = max(1.0, float(np.max(np.abs(a)))) ** n
        for lam in res.values:
            assert abs(poly_eval(coeffs, float(lam))) <= 1e-8 * scale


def test_eig_sym_reconstruction_and_orthogonality():
    rng = np.random.default_rng(1)
    for _ in range(30):
        n = int(rng.integers(2, 10))
        a = rng.standard_normal((n, n))
        a = (a + a.T) / 2.0
        res = eig_sym(a)
        v = res.vectors
        assert np.allclose(v.T @ v, np.eye(n), atol=1e-10)
        assert np.allclose(v @ np.diag(res.values) @ v.T, a, atol=1e-9 * max(1.0, np.abs(a).max()))
        assert np.all(np.diff(res.values) >= 0.0)


def test_eig_sym_agrees_with_reference():
    rng = np.random.default_rng(2)
    for _ in range(30):
        n = int(rng.integers(1, 12))
        a = rng.standard_normal((n, n))
        a = a + a.T
        got = eig_sym(a).values
        want = np.linalg.eigvalsh(a)
        assert np.allclose(got, want, atol=1e-9 * max(1.0, np.abs(want).max()))


def test_eig_sym_rejects_asymmetric_and_nonfinite():
    with pytest.raises(InvalidMatrix):
        eig_sym(np.array([[0.0, 1.0], [0.0, 0.0]]))
    with pytest.raises(InvalidMatrix):
        eig_sym(np.array([[np.nan, 0.0], [0.0, 1.0]]))
    with pytest.raises(InvalidMatrix):
        eig_sym(np.ones((2, 3)))


def test_cholesky_factorizes_and_solves():
    rng = np.random.default_rng(3)
    for _ in range(25):
        n = int(rng.integers(1, 10))
        m = random_spd(rng, n, cond=float(rng.uniform(1.0, 1e5)))
        lo = cholesky(m)
        assert np.allclose(lo @ lo.T, m, atol=1e-10 * max(1.0, np.abs(m).max()))
        b = rng.standard_normal(n)
        x = solve_cholesky(lo, b)
        assert np.allclose(m @ x, b, atol=1e-7 * max(1.0, np.abs(b).max()))
        assert np.allclose(solve_spd(m, b), x)


def test_cholesky_rejects_indefinite():
    with pytest.raises(NotPositiveDefinite):
        cholesky(np.array([[1.0, 2.0], [2.0, 1.0]]))
    with pytest.raises(NotPositiveDefinite):
        cholesky(np.zeros((3, 3)))


def test_pencil_min_eig_matches_bisection_oracle():
    rng = np.random.default_rng(4)
    for _ in range(25):
        n = int(rng.integers(2, 8))
        p = rng.standard_normal((n, n))
        p = (p + p.T) / 2.0
        a = random_spd(rng, n, cond=float(rng.uniform(1.0, 100.0)))
        got = pencil_min_eig(p, a)
        want = pencil_min_eig_bisect(p, a)
        assert abs(got - want) <= 1e-8 * max(1.0, abs(want))


def test_pencil_min_eigpair_satisfies_the_pencil_equation():
    rng = np.random.default_rng(5)
    for _ in range(25):
        n = int(rng.integers(2, 8))
        p = rng.standard_normal((n, n))
        p = (p + p.T) / 2.0
        a = random_spd(rng, n)
        w, u = pencil_min_eigpair(p, a)
        # (P - wA) u = 0 with a unit-norm direction
        resid = np.linalg.norm(p @ u - w * (a @ u))
        assert resid <= 1e-7 * max(1.0, np.linalg.norm(p @ u))
        assert abs(float(u @ u) - 1.0) <= 1e-8
        assert abs(w - pencil_min_eig(p, a)) <= 1e-10 * max(1.0, abs(w))


def test_symmetrize_tolerates_roundoff_but_not_structure():
    a = np.array([[1.0, 2.0], [2.0 + 1e-13, 3.0]])
    s = symmetrize(a)
    assert np.array_equal(s, s.T)
    with pytest.raises(InvalidMatrix):
        symmetrize(np.array([[1.0, 2.0], [2.5, 3.0]]))


def test_fix_sign_pins_first_nonzero_positive():
    u = np.array([0.0, -0.3, 0.7])
    v = fix_sign(u)
    assert v[1] > 0.0
    assert np.allclose(np.abs(v), np.abs(u))
    # idempotent and stable for already-positive leading entry
    assert np.array_equal(fix_sign(v), v)


def test_solve_spd_rejects_bad_shapes():
    with pytest.raises((InvalidInput, InvalidMatrix)):
        solve_spd(np.eye(2), np.ones(3))
