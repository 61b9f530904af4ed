"""The two block subproblems: sparse projection and the variance-floored
quadratic minimization, checked against closed forms and grid oracles."""
from __future__ import annotations

import numpy as np
import pytest

from meanrev.errors import InvalidInput, ZeroVector
from meanrev.oracles import enumerate_sparse_projection, polar_grid_min
from meanrev.subproblems import penalty_value, solve_px, solve_py
from meanrev.synthetic import random_spd


def test_solve_py_matches_enumerated_closed_form():
    rng = np.random.default_rng(0)
    for _ in range(60):
        n = int(rng.integers(2, 9))
        k = int(rng.integers(1, n + 1))
        x = rng.standard_normal(n) * float(rng.uniform(0.05, 4.0))
        proj = solve_py(x, k)
        value = float(np.sum((proj.y - x) ** 2))
        oracle, _ = enumerate_sparse_projection(x, min(k, n))
        assert abs(value - oracle) <= 1e-12
        assert np.linalg.norm(proj.y) == pytest.approx(1.0, abs=1e-12)
        assert np.count_nonzero(proj.y) <= k


def test_solve_py_breaks_magnitude_ties_to_the_lower_index():
    proj = solve_py(np.array([0.5, -0.5, 0.5]), 2)
    assert proj.support == (0, 1)
    assert proj.y[2] == 0.0


def test_solve_py_rejects_zero_and_bad_k():
    with pytest.raises(ZeroVector):
        solve_py(np.zeros(3), 1)
    with pytest.raises(InvalidInput):
        solve_py(np.ones(3), 0)
    with pytest.raises(InvalidInput):
        solve_py(np.ones(3), 4)


def test_solve_px_interior_matches_linear_solve():
    # floor low enough that the constraint is slack: the minimizer is the
    # plain regularized least squares point with lam = 0
    rng = np.random.default_rng(1)
    for _ in range(20):
        n = int(rng.integers(2, 7))
        m = random_spd(rng, n, cond=50.0)
        a = random_spd(rng, n, cond=5.0)
        y = rng.standard_normal(n)
        rho = float(rng.uniform(0.5, 5.0))
        res = solve_px(m, a, rho, y, phi=1e-10)
        want = np.linalg.solve(m + rho * np.eye(n), rho * y)
        assert res.lam == 0.0
        assert np.allclose(res.x, want, atol=1e-9)


def test_solve_px_duality_gap_and_norm_bound():
    rng = np.random.default_rng(2)
    for _ in range(60):
        n = int(rng.integers(2, 9))
        cond = float(rng.uniform(1.0, 1e4))
        m = random_spd(rng, n, cond=cond)
        a = random_spd(rng, n, cond=20.0)
        y = rng.standard_normal(n)
        rho = float(rng.uniform(0.5, 20.0))
        phi = float(rng.uniform(0.2, 0.8)) * float(np.median(np.diag(a)))
        res = solve_px(m, a, rho, y, phi)
        assert res.gap <= 1e-6 * max(1.0, abs(res.objective))
        assert float(res.x @ a @ res.x) >= phi * (1.0 - 1e-9)
        bound = max(np.sqrt(phi / np.linalg.eigvalsh(a)[0]), np.linalg.norm(y))
        assert np.linalg.norm(res.x) <= bound + 1e-8


def test_solve_px_two_dim_against_polar_grid():
    rng = np.random.default_rng(3)
    for _ in range(25):
        m = random_spd(rng, 2, cond=float(rng.uniform(1.0, 500.0)))
        a = random_spd(rng, 2, cond=10.0)
        y = rng.standard_normal(2)
        rho = float(rng.uniform(0.5, 10.0))
        phi = float(rng.uniform(0.3, 0.9)) * float(np.median(np.diag(a)))
        res = solve_px(m, a, rho, y, phi)
        oracle = polar_grid_min(m, a, rho, y, phi)
        assert abs(res.objective - oracle) <= 1e-4 * max(1.0, abs(oracle))


def test_solve_px_hard_case_hits_the_floor_exactly():
    # y orthogonal to the bottom pencil direction: the secular branch
    # cannot reach the floor and a null component must be added
    m = np.diag([1.0, 2.0])
    a = np.eye(2)
    res = solve_px(m, a, 1.0, np.array([0.0, 0.5]), 0.5)
    assert res.hard_case
    assert float(res.x @ a @ res.x) == pytest.approx(0.5, rel=1e-8)
    assert res.gap <= 1e-6
    # derived by hand: x1 = rho*y1/(M11+rho-lam) = 0.5, null part fills
    # the variance to the floor
    assert res.x == pytest.approx([0.5, 0.5], abs=1e-6)


def test_solve_px_zero_target_returns_scaled_bottom_direction():
    m = np.diag([1.0, 2.0])
    a = np.eye(2)
    res = solve_px(m, a, 1.0, np.zeros(2), 0.5)
    # boundary point along e0: objective 0.5*1 + 1*0.5; the alternative
    # coordinate costs 1.5
    assert res.objective == pytest.approx(1.0, rel=1e-9)
    assert abs(res.x[0]) == pytest.approx(np.sqrt(0.5), rel=1e-9)


def test_penalty_value_identity():
    rng = np.random.default_rng(4)
    m = random_spd(rng, 3)
    x = rng.standard_normal(3)
    y = rng.standard_normal(3)
    got = penalty_value(m, 2.5, x, y)
    want = float(x @ m @ x) + 2.5 * float(np.sum((x - y) ** 2))
    assert got == pytest.approx(want, rel=1e-14)
