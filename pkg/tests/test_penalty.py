"""Stage one: block descent monotonicity, continuation, and certificates."""
from __future__ import annotations

import numpy as np
import pytest

from meanrev.errors import Infeasible, InvalidInput
from meanrev.model import ProblemInstance, kkt_residual
from meanrev.penalty import PdConfig, bcd_solve, certify_feasibility, initial_y, pd_solve
from meanrev.subproblems import penalty_value
from meanrev.synthetic import planted_instance, random_instance

TIGHT = PdConfig(inner_tol=1e-9, outer_tol=1e-6, max_inner=20000)


def test_config_validation():
    with pytest.raises(InvalidInput):
        PdConfig(rho0=0.0)
    with pytest.raises(InvalidInput):
        PdConfig(growth=1.0)
    with pytest.raises(InvalidInput):
        PdConfig(inner_tol=-1.0)
    with pytest.raises(InvalidInput):
        PdConfig(max_inner=0)


def test_initial_y_picks_the_highest_variance_asset():
    inst = ProblemInstance(M=np.eye(3), A=np.diag([0.5, 2.0, 1.0]), phi=0.1, k=2)
    y = initial_y(inst)
    assert y[1] == 1.0 and np.count_nonzero(y) == 1


def test_certify_feasibility_catches_an_unreachable_floor():
    inst = ProblemInstance(M=np.eye(4), A=np.eye(4), phi=2.0, k=2)
    with pytest.raises(Infeasible):
        certify_feasibility(inst)
    with pytest.raises(Infeasible):
        pd_solve(inst)


def test_bcd_descends_the_penalty_objective():
    rng = np.random.default_rng(0)
    cfg = PdConfig()
    worst = -np.inf
    for _ in range(15):
        inst = random_instance(rng, n=8, k=3)
        y = initial_y(inst)
        rho = cfg.rho0
        for _level in range(8):
            state = bcd_solve(inst, rho, y, cfg)
            if state.q_history.size > 1:
                worst = max(worst, float(np.diff(state.q_history).max()))
            y = state.y
            rho *= cfg.growth
    assert worst <= 1e-10


def test_bcd_respects_the_iteration_cap():
    rng = np.random.default_rng(1)
    inst = random_instance(rng, n=8, k=3)
    cfg = PdConfig(inner_tol=1e-16, max_inner=3)
    state = bcd_solve(inst, 1.0, initial_y(inst), cfg)
    assert state.iterations == 3 and not state.converged


def test_bcd_fixed_point_on_an_isotropic_instance():
    # with M = c*I and A = I every unit k-sparse vector is already a
    # saddle point of the penalty problem: one pass must reproduce it
    inst = ProblemInstance(M=2.0 * np.eye(4), A=np.eye(4), phi=0.5, k=2)
    y0 = np.zeros(4)
    y0[0] = 1.0
    state = bcd_solve(inst, 1.0, y0, PdConfig())
    assert state.converged
    assert np.allclose(state.y, y0, atol=1e-12)
    q = penalty_value(inst.M, state.rho, state.x, state.y)
    assert q == pytest.approx(state.q_history[-1], rel=1e-10)


def test_pd_solve_reaches_stationarity_on_random_instances():
    rng = np.random.default_rng(2)
    for _ in range(8):
        inst = random_instance(rng, n=8, k=3)
        y, support, diag = pd_solve(inst, TIGHT)
        assert len(support) == inst.k
        assert diag.kkt.residual <= 1e-4
        assert np.count_nonzero(y) <= inst.k
        assert np.linalg.norm(y) == pytest.approx(1.0, abs=1e-8)


def test_pd_outer_iterates_stay_bounded():
    rng = np.random.default_rng(3)
    for _ in range(6):
        inst = random_instance(rng, n=8, k=3)
        _, _, diag = pd_solve(inst, TIGHT)
        a_min = float(np.linalg.eigvalsh(inst.A)[0])
        bound = max(np.sqrt(inst.phi / a_min), 1.0) + 1e-6
        for record in diag.records:
            assert record.x_norm <= bound


def test_pd_multiplier_matches_the_kkt_fit():
    # the penalty multiplier estimate at the final rho should agree with
    # the least-squares mu from the stationarity system when the solve is
    # tight and the floor is slack
    rng = np.random.default_rng(4)
    inst, block = planted_instance(rng, n=8, k=3)
    y, support, diag = pd_solve(inst, TIGHT)
    cert = kkt_residual(inst, y, support)
    if cert.lam == 0.0:
        assert diag.mu_penalty == pytest.approx(cert.mu, rel=5e-2, abs=5e-3)


def test_pd_recovers_a_planted_block():
    rng = np.random.default_rng(5)
    inst, block = planted_instance(rng, n=9, k=3)
    _, support, _ = pd_solve(inst, TIGHT)
    assert support == block


def test_pd_rejects_bad_warm_start():
    inst = ProblemInstance(M=np.eye(3), A=np.eye(3), phi=0.5, k=2)
    with pytest.raises(InvalidInput):
        pd_solve(inst, y0=np.ones(2))
