"""Stage two: greedy support improvement by augment-then-contract sweeps.

Starting from a feasible size-k support, each round adds the best s
complement indices (judged by the exact restricted solver on the enlarged
support) and then keeps the best k of the k + s candidates. Every iterate
is globally optimal on its own support, so feasibility is automatic and
the accepted objective values decrease strictly.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .errors import Infeasible, InvalidInput
from .model import PortfolioSolution, ProblemInstance, as_support
from .restricted import RestrictedSolution, solve_restricted


@dataclass(frozen=True)
class GreedyTrace:
    """Accepted supports with their restricted optima, plus sweep counters.

    ``iterations`` holds (support, value) for the start point and each
    accepted move; values decrease strictly by more than the tolerance
    that accepted them. ``evaluated_count`` is the number of restricted
    solves performed across all sweeps.
    """

    iterations: tuple[tuple[tuple[int, ...], float], ...]
    swap_size: int
    evaluated_count: int


def _solve_value(
    inst: ProblemInstance, support: tuple[int, ...]
) -> tuple[float, RestrictedSolution | None]:
    try:
        sol = solve_restricted(inst, support)
    except Infeasible:
        return np.inf, None
    return sol.value, sol


def greedy_improve(
    inst: ProblemInstance,
    s0,
    s: int = 2,
    decrease_tol: float = 1e-8,
    threads: int = 1,
) -> tuple[PortfolioSolution, GreedyTrace]:
    """Improve a feasible support by s-index swaps until no move helps.

    Each round enumerates every s-subset of the complement, augments with
    the best one (ties to the lexicographically smallest), then evaluates
    all k-subsets of the enlarged support and keeps the best; the current
    support wins ties within decrease_tol. Stops when the accepted value
    improves by decrease_tol or less. Candidate sweeps run as an order-
    preserving map, so the result does not depend on the thread count.
    """
    if s < 1:
        raise InvalidInput(f"swap size must be at least 1, got {s}")
    if threads < 1:
        raise InvalidInput(f"thread count must be at least 1, got {threads}")
    support = as_support(s0, inst.n)
    if len(support) != inst.k:
        raise InvalidInput(
            f"starting support has {len(support)} indices, expected k={inst.k}"
        )
    value, best = _solve_value(inst, support)
    if best is None:
        raise Infeasible(f"starting support {support} cannot meet the variance floor")
    evaluated = 1
    history = [(support, value)]

    def sweep(cands: list[tuple[int, ...]]):
        if threads > 1 and len(cands) > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                return list(pool.map(lambda c: _solve_value(inst, c), cands))
        return [_solve_value(inst, c) for c in cands]

    while True:
        complement = [i for i in range(inst.n) if i not in support]
        if len(complement) < s:
            break
        enlarged = [
            tuple(sorted(support + js)) for js in combinations(complement, s)
        ]
        aug = sweep(enlarged)
        evaluated += len(aug)
        pick = 0
        for i in range(1, len(aug)):
            if aug[i][0] < aug[pick][0]:
                pick = i
        grown = enlarged[pick]

        subsets = list(combinations(grown, inst.k))
        con = sweep(subsets)
        evaluated += len(con)
        pick = 0
        for i in range(1, len(con)):
            if con[i][0] < con[pick][0]:
                pick = i
        new_value, new_best = con[pick]
        if new_best is None or new_value >= value - decrease_tol:
            break
        support, value, best = subsets[pick], new_value, new_best
        history.append((support, value))

    trace = GreedyTrace(
        iterations=tuple(history),
        swap_size=s,
        evaluated_count=evaluated,
    )
    return PortfolioSolution.from_vector(inst, best.x, support), trace
