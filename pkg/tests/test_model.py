"""Instance validation, solution invariants, and first-order certificates."""
from __future__ import annotations

import numpy as np
import pytest

from meanrev.errors import Infeasible, InvalidIndexSet, InvalidInput
from meanrev.model import (
    PortfolioSolution,
    ProblemInstance,
    as_support,
    kkt_residual,
    pad_support,
    robinson_check,
    support_feasible,
)
from meanrev.synthetic import random_spd


def small_instance(phi: float = 0.5, k: int = 2) -> ProblemInstance:
    m = np.diag([2.0, 1.0, 3.0])
    a = np.eye(3)
    return ProblemInstance(M=m, A=a, phi=phi, k=k)


def test_instance_validates_inputs():
    with pytest.raises(InvalidInput):
        ProblemInstance(M=np.eye(2), A=np.eye(3), phi=1.0, k=1)
    with pytest.raises(InvalidInput):
        ProblemInstance(M=np.eye(3), A=np.eye(3), phi=-1.0, k=1)
    with pytest.raises(InvalidInput):
        ProblemInstance(M=np.eye(3), A=np.eye(3), phi=1.0, k=3)  # k must be < n
    with pytest.raises(InvalidInput):
        ProblemInstance(M=np.eye(3), A=np.eye(3), phi=1.0, k=0)
    with pytest.raises(InvalidInput):
        ProblemInstance(M=-np.eye(3), A=np.eye(3), phi=1.0, k=1)


def test_instance_symmetrizes_roundoff():
    m = np.array([[2.0, 1e-14], [0.0, 1.0]])
    inst = ProblemInstance(M=m, A=np.eye(2), phi=0.1, k=1)
    assert np.array_equal(inst.M, inst.M.T)


def test_support_helpers():
    assert as_support([2, 0], 5) == (0, 2)
    with pytest.raises(InvalidIndexSet):
        as_support([0, 0], 5)
    with pytest.raises(InvalidIndexSet):
        as_support([5], 5)
    with pytest.raises(InvalidIndexSet):
        as_support([], 5)
    # padding deterministically extends with the smallest unused indices
    assert pad_support((3,), 3, 5) == (0, 1, 3)
    assert pad_support((0, 1), 2, 5) == (0, 1)


def test_support_feasible_is_eigenvalue_test_and_monotone():
    a = np.diag([1.0, 0.2, 0.05])
    inst = ProblemInstance(M=np.eye(3), A=a, phi=0.5, k=2)
    assert support_feasible(inst, (0,))
    assert not support_feasible(inst, (2,))
    assert not support_feasible(inst, (1, 2))
    # growing a feasible support keeps it feasible
    assert support_feasible(inst, (0, 2))


def test_portfolio_solution_accepts_a_valid_point():
    inst = small_instance()
    x = np.array([1.0, 0.0, 0.0])
    sol = PortfolioSolution.from_vector(inst, x)
    assert sol.support == (0, 1)  # padded to size k
    assert sol.objective == pytest.approx(2.0)
    assert not sol.active_constraint  # variance 1 > phi 0.5


def test_portfolio_solution_rejects_bad_points():
    inst = small_instance()
    with pytest.raises(InvalidInput):
        PortfolioSolution.from_vector(inst, np.array([2.0, 0.0, 0.0]))
    with pytest.raises(InvalidInput):
        PortfolioSolution.from_vector(inst, np.array([1.0, 0.0, 0.0]), support=(1, 2))
    with pytest.raises(InvalidIndexSet):
        PortfolioSolution.from_vector(inst, np.array([1.0, 0.0, 0.0]), support=(0,))
    tight = small_instance(phi=1.5)
    with pytest.raises(Infeasible):
        PortfolioSolution.from_vector(tight, np.array([1.0, 0.0, 0.0]))


def test_kkt_residual_vanishes_at_an_unconstrained_eigenvector():
    # with the variance floor slack, any eigenvector of M on its own
    # support is stationary: mu = -eigenvalue, lam = 0
    inst = small_instance(phi=0.5, k=2)
    x = np.array([0.0, 1.0, 0.0])
    cert = kkt_residual(inst, x, (0, 1))
    assert cert.lam == 0.0
    assert cert.mu == pytest.approx(-1.0)
    assert cert.residual <= 1e-12


def test_kkt_residual_detects_a_nonstationary_point():
    inst = small_instance(phi=0.5, k=2)
    x = np.array([1.0, 1.0, 0.0]) / np.sqrt(2.0)
    cert = kkt_residual(inst, x, (0, 1))
    assert cert.residual > 1e-2


def test_kkt_multipliers_on_a_binding_constraint():
    rng = np.random.default_rng(7)
    m = random_spd(rng, 4, cond=30.0)
    a = random_spd(rng, 4, cond=5.0)
    inst = ProblemInstance(M=m, A=a, phi=float(np.median(np.diag(a))), k=3)
    from meanrev.restricted import solve_restricted

    sol = solve_restricted(inst, (0, 1, 2))
    cert = kkt_residual(inst, sol.x, (0, 1, 2))
    assert cert.lam >= 0.0
    assert cert.residual <= 1e-6 * max(1.0, float(np.abs(m).max()))


def test_kkt_off_support_rows_are_absorbed():
    inst = small_instance()
    x = np.array([1.0, 0.0, 0.0])
    cert = kkt_residual(inst, x, (0, 1))
    # w vanishes on the support and absorbs the rest exactly
    assert cert.w[0] == 0.0 and cert.w[1] == 0.0


def test_robinson_holds_when_slack_and_detects_degenerate_binding():
    inst = small_instance(phi=0.5)
    assert robinson_check(inst, np.array([1.0, 0.0, 0.0]), (0, 1))
    # A = I makes Ax parallel to x, so a binding floor is degenerate
    tight = ProblemInstance(M=np.diag([2.0, 1.0, 3.0]), A=np.eye(3), phi=1.0 - 1e-12, k=2)
    assert not robinson_check(tight, np.array([1.0, 0.0, 0.0]), (0, 1))
    # with distinct A-eigenvalues the same binding point is regular
    mixed = ProblemInstance(
        M=np.diag([2.0, 1.0, 3.0]),
        A=np.array([[1.0, 0.3, 0.0], [0.3, 0.5, 0.0], [0.0, 0.0, 0.4]]),
        phi=1.0 - 1e-12,
        k=2,
    )
    assert robinson_check(mixed, np.array([1.0, 0.0, 0.0]), (0, 1))
