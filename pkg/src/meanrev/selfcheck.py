"""Built-in verification suites runnable from the command line.

Six independent suites cross-check the solver against oracles that share
no code with the implementation under test: closed-form enumeration for
the sparse projection, dense polar/sphere grids for the quadratic
subproblems, algebraic trace identities for rank reduction, the
monotonicity law of the inner descent loop, and exhaustive support
search for the greedy stage. A fault-injection mode replaces every
tolerance with an unattainable one so the harness itself can be seen to
detect and count failures.
"""
from __future__ import annotations

import time
from dataclasses import dataclass
from itertools import combinations
from typing import Callable

import numpy as np

from .estimation import build_instance
from .greedy import greedy_improve
from .model import Infeasible, ProblemInstance
from .oracles import (
    enumerate_sparse_projection,
    exhaustive_best_support,
    polar_grid_min,
    sphere_grid_min,
)
from .penalty import PdConfig, bcd_solve, initial_y, pd_solve
from .restricted import PsdSolution, rank_reduce, solve_restricted
from .subproblems import solve_px, solve_py
from .synthetic import (
    planted_instance,
    planted_ou_prices,
    random_instance,
    random_spd,
)


@dataclass(frozen=True)
class SuiteResult:
    name: str
    passed: int
    failed: int
    worst: float
    seconds: float

    @property
    def ok(self) -> bool:
        return self.failed == 0


def _tol(value: float, inject: bool) -> float:
    # Fault injection perturbs every tolerance to an unattainable one so
    # each comparison reports a failure; this is a harness sanity mode,
    # not a tighter test.
    return -1.0 if inject else value


def suite_sparse_projection(rng: np.random.Generator, cases: int, inject: bool) -> tuple[int, int, float]:
    passed = failed = 0
    worst = 0.0
    tol = _tol(1e-12, inject)
    for _ in range(cases):
        n = int(rng.integers(2, 11))
        k = int(rng.integers(1, n))
        x = rng.standard_normal(n) * float(rng.uniform(0.1, 3.0))
        proj = solve_py(x, k)
        value = float(np.sum((proj.y - x) ** 2))
        oracle, _ = enumerate_sparse_projection(x, k)
        err = abs(value - oracle)
        worst = max(worst, err)
        if err <= tol:
            passed += 1
        else:
            failed += 1
    return passed, failed, worst


def suite_px_duality(rng: np.random.Generator, cases: int, inject: bool) -> tuple[int, int, float]:
    passed = failed = 0
    worst = 0.0
    gap_tol = _tol(1e-6, inject)
    grid_tol = _tol(1e-4, inject)
    for case in range(cases):
        n = 2 if case % 2 == 0 else int(rng.integers(2, 11))
        cond = float(rng.uniform(1.0, 1e4))
        m = random_spd(rng, n, cond=cond)
        a = random_spd(rng, n, cond=min(cond, 100.0))
        y = rng.standard_normal(n)
        rho = float(rng.uniform(0.5, 30.0))
        phi = float(rng.uniform(0.2, 0.9)) * float(np.median(np.diag(a)))
        res = solve_px(m, a, rho, y, phi)
        ok = res.gap <= gap_tol * max(1.0, abs(res.objective))
        bound = max(np.sqrt(phi / np.linalg.eigvalsh(a)[0]), np.linalg.norm(y))
        ok = ok and np.linalg.norm(res.x) <= bound + _tol(1e-8, inject)
        err = res.gap
        if n == 2:
            oracle = polar_grid_min(m, a, rho, y, phi)
            err = max(err, abs(res.objective - oracle))
            ok = ok and abs(res.objective - oracle) <= grid_tol
        worst = max(worst, err)
        if ok:
            passed += 1
        else:
            failed += 1
    return passed, failed, worst


def _embed_pair(q0: np.ndarray, q1: np.ndarray) -> ProblemInstance:
    """Lift a sphere-form pair into a full instance whose restriction to
    the leading block reproduces (Q0, Q1) exactly (phi = 1 divides out)."""
    m = q0.shape[0]
    big_m = np.eye(m + 1)
    big_m[:m, :m] = q0
    big_a = np.eye(m + 1)
    big_a[:m, :m] = -q1
    return ProblemInstance(M=big_m, A=big_a, phi=1.0, k=m)


def suite_sphere_grid(rng: np.random.Generator, cases: int, inject: bool) -> tuple[int, int, float]:
    passed = failed = 0
    worst = 0.0
    value_tol = _tol(1e-3, inject)
    feas_tol = _tol(1e-8, inject)
    gap_tol = _tol(1e-6, inject)
    for _ in range(cases):
        order = int(rng.integers(1, 4))
        q0 = random_spd(rng, order, cond=float(rng.uniform(1.0, 50.0)))
        # scale so the top eigenvalue of -Q1 clears 1: the pair stays feasible
        w = random_spd(rng, order, cond=10.0)
        w *= float(rng.uniform(1.2, 5.0)) / np.linalg.eigvalsh(w)[-1]
        q1 = -w
        inst = _embed_pair(q0, q1)
        sol = solve_restricted(inst, tuple(range(order)))
        u = sol.x[:order]
        grid = sphere_grid_min(q0, q1)
        err = max(sol.value - grid, 0.0)
        feas = float(u @ q1 @ u)
        ok = (
            sol.value <= grid + value_tol
            and feas <= -1.0 + feas_tol
            and sol.certificate.gap <= gap_tol * max(1.0, abs(sol.value))
        )
        worst = max(worst, err)
        if ok:
            passed += 1
        else:
            failed += 1
    return passed, failed, worst


def suite_rank_reduce(rng: np.random.Generator, cases: int, inject: bool) -> tuple[int, int, float]:
    passed = failed = 0
    worst = 0.0
    tol = _tol(1e-8, inject)
    for _ in range(cases):
        rank = int(rng.integers(1, 7))
        n = int(rng.integers(rank, 9))
        g = rng.standard_normal((n, rank))
        y = g @ g.T
        y /= np.trace(y)
        q1 = -random_spd(rng, n, cond=20.0)
        sol = PsdSolution(Y=y, rank=rank)
        red = rank_reduce(sol, q1)
        tr_err = abs(float(np.trace(red.Y)) - float(np.trace(y)))
        lin_err = abs(float(np.sum(q1 * red.Y)) - float(np.sum(q1 * y)))
        err = max(tr_err, lin_err)
        worst = max(worst, err)
        if red.rank == 1 and err <= tol:
            passed += 1
        else:
            failed += 1
    return passed, failed, worst


def suite_bcd_monotone(rng: np.random.Generator, cases: int, inject: bool) -> tuple[int, int, float]:
    passed = failed = 0
    worst = -np.inf
    slack = _tol(1e-10, inject)
    cfg = PdConfig()
    for _ in range(cases):
        inst = random_instance(rng, n=8, k=3)
        y = initial_y(inst)
        rho = cfg.rho0
        ok = True
        for _level in range(8):
            state = bcd_solve(inst, rho, y, cfg)
            increases = np.diff(state.q_history)
            if increases.size:
                step_worst = float(increases.max())
                worst = max(worst, step_worst)
                if step_worst > slack:
                    ok = False
            y = state.y
            rho *= cfg.growth
        if ok:
            passed += 1
        else:
            failed += 1
    if not np.isfinite(worst):
        worst = 0.0
    return passed, failed, worst


def suite_greedy_exhaustive(rng: np.random.Generator, cases: int, inject: bool) -> tuple[int, int, float]:
    passed = failed = 0
    worst = 0.0
    rel_tol = _tol(0.05, inject)
    for case in range(cases):
        if case % 3 == 2:
            # estimated from a planted price panel: the representative class
            pm, _ = planted_ou_prices(rng, t=2000, theta=0.3)
            inst = build_instance(pm, k=4)
        else:
            inst, _ = planted_instance(
                rng, n=int(rng.integers(9, 13)), k=3, strength=float(rng.uniform(0.01, 0.1))
            )
        try:
            _, support, _ = pd_solve(inst)
            stage_one = solve_restricted(inst, support).value
            sol, trace = greedy_improve(inst, support)
        except Infeasible:
            failed += 1
            continue
        best_val, _, _ = exhaustive_best_support(inst)
        rel = (sol.objective - best_val) / max(abs(best_val), 1e-12)
        values = [v for _, v in trace.iterations]
        decreasing = all(b < a for a, b in zip(values, values[1:]))
        ok = rel <= rel_tol and sol.objective <= stage_one + 1e-12 and decreasing
        worst = max(worst, rel)
        if ok:
            passed += 1
        else:
            failed += 1
    return passed, failed, worst


_SuiteFn = Callable[[np.random.Generator, int, bool], tuple[int, int, float]]

# (name, function, full case count, quick case count)
SUITES: tuple[tuple[str, _SuiteFn, int, int], ...] = (
    ("sparse-projection", suite_sparse_projection, 200, 40),
    ("px-duality", suite_px_duality, 200, 30),
    ("sphere-grid-qcqp", suite_sphere_grid, 100, 15),
    ("rank-reduce", suite_rank_reduce, 500, 60),
    ("bcd-monotone", suite_bcd_monotone, 50, 8),
    ("greedy-exhaustive", suite_greedy_exhaustive, 10, 3),
)


def run_suites(
    seed: int = 0,
    quick: bool = False,
    inject: bool = False,
    emit: Callable[[str], None] = print,
) -> list[SuiteResult]:
    results = []
    total_start = time.perf_counter()
    for index, (name, fn, full, small) in enumerate(SUITES):
        cases = small if quick else full
        rng = np.random.default_rng([seed, index])
        start = time.perf_counter()
        passed, failed, worst = fn(rng, cases, inject)
        elapsed = time.perf_counter() - start
        results.append(SuiteResult(name, passed, failed, worst, elapsed))
        status = "ok" if failed == 0 else "FAIL"
        emit(
            f"{name:<20s} {status:>4s}  passed {passed}/{passed + failed}"
            f"  worst {worst:.3e}  ({elapsed:.2f}s)"
        )
    total = time.perf_counter() - total_start
    failures = sum(r.failed for r in results)
    if failures == 0:
        emit(f"selfcheck: all {len(results)} suites passed ({total:.2f}s)")
    else:
        emit(f"selfcheck: {failures} failures across {len(results)} suites ({total:.2f}s)")
    return results
