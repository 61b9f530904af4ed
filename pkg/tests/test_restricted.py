"""Restricted subproblem: scalar dual, face recovery, rank reduction."""
from __future__ import annotations

import numpy as np
import pytest

from meanrev.errors import DualUnbounded, Infeasible, InvalidIndexSet, InvalidInput
from meanrev.model import ProblemInstance
from meanrev.oracles import sphere_grid_min
from meanrev.restricted import (
    PsdSolution,
    ReducedPair,
    dual_maximize,
    rank_reduce,
    recover_primal,
    restrict,
    solve_restricted,
)
from meanrev.synthetic import random_spd


def embed(q0: np.ndarray, q1: np.ndarray) -> ProblemInstance:
    """Instance whose restriction to the leading block is exactly (Q0, Q1)."""
    m = q0.shape[0]
    big_m = np.eye(m + 1)
    big_m[:m, :m] = q0
    big_a = np.eye(m + 1)
    big_a[:m, :m] = -q1
    return ProblemInstance(M=big_m, A=big_a, phi=1.0, k=m)


def feasible_pair(rng, order: int) -> tuple[np.ndarray, np.ndarray]:
    q0 = random_spd(rng, order, cond=float(rng.uniform(1.0, 50.0)))
    w = random_spd(rng, order, cond=10.0)
    w *= float(rng.uniform(1.2, 5.0)) / np.linalg.eigvalsh(w)[-1]
    return q0, -w


def test_restrict_builds_the_sphere_form():
    rng = np.random.default_rng(0)
    m = random_spd(rng, 5)
    a = random_spd(rng, 5)
    inst = ProblemInstance(M=m, A=a, phi=0.3, k=3)
    pair = restrict(inst, (0, 2, 4))
    sel = [0, 2, 4]
    assert np.allclose(pair.Q0, m[np.ix_(sel, sel)])
    assert np.allclose(pair.Q1, -a[np.ix_(sel, sel)] / 0.3)
    assert pair.support == (0, 2, 4)


def test_restrict_rejects_unreachable_floor():
    inst = ProblemInstance(M=np.eye(3), A=np.diag([1.0, 0.1, 0.1]), phi=0.5, k=2)
    with pytest.raises(Infeasible):
        restrict(inst, (1, 2))
    with pytest.raises(InvalidIndexSet):
        restrict(inst, (0, 0))


def test_reduced_pair_validates_definiteness():
    with pytest.raises(InvalidInput):
        ReducedPair(Q0=np.diag([1.0, -1.0]), Q1=-np.eye(2), support=(0, 1), phi=1.0)
    with pytest.raises(InvalidInput):
        ReducedPair(Q0=np.eye(2), Q1=np.eye(2), support=(0, 1), phi=1.0)


def test_dual_value_bounds_the_binding_problem():
    # when the bottom eigenvector of Q0 violates the constraint the
    # minimum sits on the boundary and the scalar dual must bound every
    # feasible direction the grid samples
    rng = np.random.default_rng(1)
    checked = 0
    while checked < 25:
        order = int(rng.integers(2, 4))
        q0, q1 = feasible_pair(rng, order)
        _, vecs = np.linalg.eigh(q0)
        bottom = vecs[:, 0]
        if float(bottom @ q1 @ bottom) <= -1.0:
            continue  # unconstrained minimum already feasible; not this case
        pair = ReducedPair(Q0=q0, Q1=q1, support=tuple(range(order)), phi=1.0)
        cert = dual_maximize(pair)
        grid = sphere_grid_min(q0, q1)
        assert cert.dual_value <= grid + 1e-6 * max(1.0, abs(grid))
        checked += 1


def test_dual_unbounded_when_no_direction_can_bind():
    # every unit vector sits strictly inside the constraint: the equality
    # form has no feasible point and the ascent must diverge
    pair = ReducedPair(Q0=np.eye(2), Q1=-np.diag([2.0, 3.0]), support=(0, 1), phi=1.0)
    with pytest.raises(DualUnbounded):
        dual_maximize(pair)


def test_recover_and_reduce_give_a_feasible_rank_one_point():
    rng = np.random.default_rng(2)
    for _ in range(40):
        order = int(rng.integers(2, 4))
        q0, q1 = feasible_pair(rng, order)
        pair = ReducedPair(Q0=q0, Q1=q1, support=tuple(range(order)), phi=1.0)
        cert = dual_maximize(pair)
        psd = recover_primal(pair, cert)
        if psd.rank > 1:
            psd = rank_reduce(psd, pair.Q1)
        assert psd.rank == 1
        vals, vecs = np.linalg.eigh(psd.Y)
        u = vecs[:, -1] * np.sqrt(max(vals[-1], 0.0))
        # trace constraints carried through the reduction
        assert float(np.trace(psd.Y)) == pytest.approx(1.0, abs=1e-8)
        assert float(u @ q1 @ u) <= -1.0 + 1e-6


def test_rank_reduce_preserves_both_traces():
    rng = np.random.default_rng(3)
    for _ in range(60):
        rank = int(rng.integers(2, 7))
        n = int(rng.integers(rank, 9))
        g = rng.standard_normal((n, rank))
        y = g @ g.T
        y /= np.trace(y)
        q1 = -random_spd(rng, n, cond=15.0)
        red = rank_reduce(PsdSolution(Y=y, rank=rank), q1)
        assert red.rank == 1
        assert float(np.trace(red.Y)) == pytest.approx(float(np.trace(y)), abs=1e-8)
        assert float(np.sum(q1 * red.Y)) == pytest.approx(float(np.sum(q1 * y)), abs=1e-8)


def test_solve_restricted_never_beats_the_grid_and_is_feasible():
    rng = np.random.default_rng(4)
    for _ in range(40):
        order = int(rng.integers(1, 4))
        q0, q1 = feasible_pair(rng, order)
        inst = embed(q0, q1)
        sol = solve_restricted(inst, tuple(range(order)))
        u = sol.x[:order]
        grid = sphere_grid_min(q0, q1)
        assert sol.value <= grid + 1e-3
        assert float(u @ q1 @ u) <= -1.0 + 1e-8
        assert sol.certificate.gap <= 1e-6 * max(1.0, abs(sol.value))
        # embedded coordinate stays out of the support
        assert sol.x[order] == 0.0


def test_solve_restricted_shortcut_when_bottom_eigvec_is_feasible():
    # Q0 = diag: bottom eigenvector e1 satisfies the variance constraint
    # outright, so the unconstrained sphere minimum is returned
    inst = ProblemInstance(M=np.diag([3.0, 1.0, 2.0]), A=np.eye(3), phi=0.5, k=2)
    sol = solve_restricted(inst, (0, 1))
    assert sol.value == pytest.approx(1.0, rel=1e-10)
    assert abs(sol.x[1]) == pytest.approx(1.0, rel=1e-10)
    assert not sol.certificate.active


def test_solve_restricted_reports_infeasible_supports():
    inst = ProblemInstance(M=np.eye(3), A=np.diag([1.0, 0.01, 0.01]), phi=0.5, k=2)
    with pytest.raises(Infeasible):
        solve_restricted(inst, (1, 2))


def test_solve_restricted_deterministic_sign():
    rng = np.random.default_rng(5)
    q0, q1 = feasible_pair(rng, 3)
    inst = embed(q0, q1)
    a = solve_restricted(inst, (0, 1, 2))
    b = solve_restricted(inst, (0, 1, 2))
    assert np.array_equal(a.x, b.x)
    # first nonzero entry fixed positive by convention
    nz = a.x[a.x != 0.0]
    assert nz.size == 0 or nz[0] > 0.0
