"""Brute-force ground truth for small instances.

Everything here recomputes quantities the main modules derive through
fixed-point iteration, but by a separate route: exhaustive enumeration
of deterministic policies with a direct depth recursion, and Monte
Carlo sampling of whole rollout trees. The two machineries share only
the discount-power helper and the sweep-cap formula, so agreement is
meaningful evidence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .mdp import TreeMdp
from .training import explore
from .values import (
    StochasticPolicy,
    discount_power,
    evaluate_policy,
    iteration_cap,
    tree_worst_path_return,
)

_CYCLE = -1  # depth marker: a cycle is reachable, value 0


class SizeGuardError(RuntimeError):
    """The deterministic-policy enumeration would be too large."""


def count_deterministic_policies(mdp: TreeMdp) -> int:
    total = 1
    for s in mdp.sweep_states:
        total *= mdp.num_actions(int(s))
    return total


def iter_deterministic_policies(mdp: TreeMdp):
    """Yield every state -> action assignment, one array per policy.

    Terminal states hold -1. Exactly prod_s |actions(s)| assignments are
    produced, each once, in lexicographic order over the state ids.
    """
    assignment = np.full(mdp.num_states, -1, dtype=np.int64)
    sweep = [int(s) for s in mdp.sweep_states]
    for s in sweep:
        assignment[s] = 0
    while True:
        yield assignment.copy()
        for s in reversed(sweep):
            assignment[s] += 1
            if assignment[s] < mdp.num_actions(s):
                break
            assignment[s] = 0
        else:
            return


def _worst_depths(mdp: TreeMdp, actions) -> list:
    """Longest-path depth to the building-block frontier under a fixed policy.

    depth(s) = 0 on building blocks, else 1 + max over the chosen
    action's children. Reaching any cycle makes the depth infinite
    (marked _CYCLE): the worst path can always keep looping.
    """
    unknown = -2
    depth = [unknown] * mdp.num_states
    on_stack = [False] * mdp.num_states

    def visit(s: int) -> int:
        if mdp.building_block[s]:
            return 0
        if on_stack[s]:
            return _CYCLE
        if depth[s] != unknown:
            return depth[s]
        on_stack[s] = True
        worst = 0
        for c in mdp.children[s][actions[s]]:
            d = visit(c)
            if d == _CYCLE:
                worst = _CYCLE
                break
            worst = max(worst, d + 1)
        on_stack[s] = False
        depth[s] = worst
        return worst

    for s in range(mdp.num_states):
        visit(s)
    return depth


def brute_force_v_star(mdp: TreeMdp, tol: float = 1e-10, guard: int = 10**6) -> np.ndarray:
    """Per-state maximum over every enumerated deterministic policy.

    Each policy is scored by the direct recursion with cycle cutoff
    (depth beyond the sweep cap counts as 0), not by the fixed-point
    solvers, so this is an independent check on value iteration.
    """
    total = count_deterministic_policies(mdp)
    if total > guard:
        raise SizeGuardError(f"{total} deterministic policies exceed the guard {guard}")
    cap = iteration_cap(mdp.gamma, tol)
    best = mdp.rewards.copy()
    for actions in iter_deterministic_policies(mdp):
        for s, d in enumerate(_worst_depths(mdp, actions)):
            if d == _CYCLE or d > cap:
                continue
            v = discount_power(mdp.gamma, d)
            if v > best[s]:
                best[s] = v
    return best


def monte_carlo_objective(
    mdp: TreeMdp,
    pi: StochasticPolicy,
    root: int,
    n: int,
    rng: np.random.Generator,
    max_steps: int = 10_000,
):
    """Sample mean and standard error of the whole-tree worst-path return.

    Draws ``n`` rollout trees and scores each one. The mean uses an
    exactly rounded sum, so a zero-variance sample returns its common
    value without accumulation noise.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    returns = [
        tree_worst_path_return(explore(mdp, pi, root, max_steps, rng), mdp)
        for _ in range(n)
    ]
    mean = math.fsum(returns) / n
    if n == 1:
        return mean, 0.0
    var = math.fsum((r - mean) ** 2 for r in returns) / (n - 1)
    return mean, math.sqrt(var / n)


@dataclass(frozen=True)
class ImprovementReport:
    improved: bool
    worst_state: int | None
    before: float
    after: float
    violation: float


def check_improvement(
    mdp: TreeMdp,
    pi_before: StochasticPolicy,
    pi_after: StochasticPolicy,
    tol: float = 1e-9,
    eval_tol: float = 1e-12,
) -> ImprovementReport:
    """Did the update avoid making any state worse (beyond ``tol``)?

    Reports the most-violating state when it did not.
    """
    v_before = evaluate_policy(mdp, pi_before, eval_tol)
    v_after = evaluate_policy(mdp, pi_after, eval_tol)
    drop = v_before - v_after
    worst = int(np.argmax(drop)) if mdp.num_states else None
    violation = float(drop[worst]) if worst is not None else 0.0
    ok = violation <= tol
    return ImprovementReport(
        improved=ok,
        worst_state=None if ok else worst,
        before=float(v_before[worst]) if worst is not None else 0.0,
        after=float(v_after[worst]) if worst is not None else 0.0,
        violation=violation,
    )
