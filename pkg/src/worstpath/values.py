"""Exact worst-path value machinery.

The return of a root-to-leaf path is gamma^T * r(s_T): only a path that
ends on a building block scores, and depth is penalised geometrically.
A whole tree is worth its weakest path. The operators here are the
policy-evaluation recursion

    V(s) = r(s) + gamma * (1 - r(s)) * sum_a pi(a|s) * min_{s' in T(s,a)} V(s')

and the optimality backup

    (B V)(s) = r(s) + gamma * (1 - r(s)) * max_a min_{s' in T(s,a)} V(s'),

a gamma-contraction in the sup norm, so value iteration converges to the
unique fixed point V*. Value tables are plain float arrays indexed by
state; building blocks sit at exactly 1 and every entry stays in [0, 1].
"""

from __future__ import annotations

import math

import numpy as np

from .mdp import InfeasibleActionError, Path, TreeMdp
from .trees import NodeStatus, SynTree


class ConvergenceError(RuntimeError):
    """An iterative solve exhausted its sweep cap before reaching tolerance."""


class UndefinedDepthError(ValueError):
    """Depth of a zero value is infinite (a dead end never terminates)."""


def iteration_cap(gamma: float, tol: float) -> int:
    """Sweep budget sufficient for a gamma-contraction to reach ``tol``."""
    return int(math.ceil(math.log(tol) / math.log(gamma))) + 64


def discount_power(gamma: float, steps: int) -> float:
    """gamma**steps by iterated multiplication.

    Matches bit-for-bit the products formed by the value recursions,
    which apply one factor of gamma per level.
    """
    v = 1.0
    for _ in range(steps):
        v *= gamma
    return v


class StochasticPolicy:
    """Per-state action distribution on the MDP's flat pair layout.

    ``probs[k]`` is the probability of pair ``k`` (state-major order) and
    must sum to 1 over each non-terminal state's actions. ``support[k]``
    marks the actions the policy is allowed to use; probability off the
    support must be zero. A base (prior) policy is simply an instance
    whose support equals its own nonzero entries.
    """

    def __init__(self, mdp: TreeMdp, probs, support=None, check: bool = True):
        self.mdp = mdp
        self.probs = np.asarray(probs, dtype=np.float64).copy()
        if support is None:
            support = np.ones(mdp.num_pairs, dtype=bool)
        self.support = np.asarray(support, dtype=bool).copy()
        if self.probs.shape != (mdp.num_pairs,) or self.support.shape != (mdp.num_pairs,):
            raise ValueError(f"policy arrays must have {mdp.num_pairs} pair entries")
        if check:
            self._check()

    def _check(self) -> None:
        if np.any(self.probs < 0):
            raise ValueError("negative action probability")
        if np.any(self.probs[~self.support] != 0.0):
            raise ValueError("probability mass outside the support mask")
        for s in self.mdp.sweep_states:
            total = self.probs[self.mdp.pair_slice(int(s))].sum()
            if abs(total - 1.0) > 1e-8:
                raise ValueError(f"state {s}: action probabilities sum to {total}")

    @classmethod
    def uniform(cls, mdp: TreeMdp) -> "StochasticPolicy":
        probs = np.zeros(mdp.num_pairs)
        for s in mdp.sweep_states:
            sl = mdp.pair_slice(int(s))
            n = sl.stop - sl.start
            probs[sl] = 1.0 / n
        return cls(mdp, probs)

    @classmethod
    def deterministic(cls, mdp: TreeMdp, action_per_state) -> "StochasticPolicy":
        """Point-mass policy; entries for terminal states are ignored."""
        probs = np.zeros(mdp.num_pairs)
        for s in mdp.sweep_states:
            probs[mdp.pair_index(int(s), int(action_per_state[int(s)]))] = 1.0
        return cls(mdp, probs)

    def at(self, s: int) -> np.ndarray:
        return self.probs[self.mdp.pair_slice(s)]

    def support_at(self, s: int) -> np.ndarray:
        return self.support[self.mdp.pair_slice(s)]

    def sample_action(self, s: int, rng: np.random.Generator) -> int:
        p = self.at(s)
        if p.size == 0:
            raise InfeasibleActionError(f"state {s} has no feasible actions")
        return int(rng.choice(p.size, p=p))

    def argmax_action(self, s: int) -> int:
        """Most likely action; ties break toward the lowest action id."""
        p = self.at(s)
        if p.size == 0:
            raise InfeasibleActionError(f"state {s} has no feasible actions")
        return int(np.argmax(p))

    def copy(self) -> "StochasticPolicy":
        return StochasticPolicy(self.mdp, self.probs, self.support, check=False)

    def __repr__(self) -> str:
        return f"StochasticPolicy(states={self.mdp.num_states}, pairs={self.probs.size})"


# -- returns of realised objects -------------------------------------------


def path_return(path: Path, mdp: TreeMdp) -> float:
    """gamma^T * r(s_T) for a single path of T actions."""
    path.validate_against(mdp)
    v = float(mdp.reward(path.states[-1]))
    for _ in path.actions:
        v *= mdp.gamma
    return v


def tree_worst_path_return(tree: SynTree, mdp: TreeMdp) -> float:
    """Minimum over all root-to-leaf paths of the discounted terminal reward.

    Leaves left unexpanded (non building blocks) contribute return 0, so a
    single unresolved or dead branch zeroes the whole tree.
    """
    worst = math.inf
    for i in tree.leaf_indices():
        node = tree.nodes[i]
        if node.status is NodeStatus.BUILDING_BLOCK:
            r = discount_power(mdp.gamma, node.depth)
        else:
            r = 0.0
        if r < worst:
            worst = r
            if worst == 0.0:
                break
    return float(worst)


# -- pointwise quantities ----------------------------------------------------


def q_value(mdp: TreeMdp, values: np.ndarray, s: int, a: int) -> float:
    """r(s) + gamma * (1 - r(s)) * min over children of V.

    Building-block states score 1 regardless of the action or table: the
    continuation term vanishes because r(s) = 1.
    """
    if mdp.reward(s):
        return 1.0
    children = mdp.expand(s, a)
    worst_child = min(float(values[c]) for c in children)
    return mdp.gamma * worst_child


def advantage(mdp: TreeMdp, values: np.ndarray, s: int, a: int) -> float:
    """How much better (s, a) fares than the state's current value."""
    return q_value(mdp, values, s, a) - float(values[s])


def all_advantages(mdp: TreeMdp, values: np.ndarray) -> np.ndarray:
    """Advantage of every (state, action) pair, on the flat pair layout."""
    values = np.asarray(values, dtype=np.float64)
    q = np.ones(mdp.num_pairs)
    if mdp.num_pairs:
        pair_min = np.minimum.reduceat(values[mdp.flat_children], mdp.pair_child_start[:-1])
        nonterm = ~mdp.building_block[mdp.pair_state]
        q[nonterm] = mdp.gamma * pair_min[nonterm]
    return q - values[mdp.pair_state]


# -- sweeps -------------------------------------------------------------------


def _pair_mins(mdp: TreeMdp, values: np.ndarray) -> np.ndarray:
    return np.minimum.reduceat(values[mdp.flat_children], mdp.pair_child_start[:-1])


def evaluate_policy(mdp: TreeMdp, pi: StochasticPolicy, tol: float = 1e-10) -> np.ndarray:
    """Fixed point of the policy-evaluation recursion, from V = rewards.

    Jacobi sweeps: every sweep reads only the previous table. Stops once
    the sup-norm change drops below ``tol``; the sweep cap derived from
    the contraction rate cannot bind unless ``tol`` is absurdly small.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    v = mdp.rewards.copy()
    if mdp.sweep_states.size == 0:
        return v
    for _ in range(iteration_cap(mdp.gamma, tol)):
        pair_min = _pair_mins(mdp, v)
        mixed = np.add.reduceat(pi.probs * pair_min, mdp.sweep_pair_start)
        nv = mdp.rewards.copy()
        nv[mdp.sweep_states] = mdp.gamma * mixed
        delta = float(np.max(np.abs(nv - v)))
        v = nv
        if delta < tol:
            return v
    raise ConvergenceError(f"policy evaluation did not reach tol={tol}")


def bellman_optimal_backup(mdp: TreeMdp, values: np.ndarray) -> np.ndarray:
    """One application of the optimality operator; the input is untouched."""
    values = np.asarray(values, dtype=np.float64)
    out = mdp.rewards.copy()
    if mdp.sweep_states.size:
        pair_min = _pair_mins(mdp, values)
        best = np.maximum.reduceat(pair_min, mdp.sweep_pair_start)
        out[mdp.sweep_states] = mdp.gamma * best
    return out


def value_iteration(mdp: TreeMdp, tol: float = 1e-10, init=None) -> np.ndarray:
    """Iterate the optimality backup to its unique fixed point V*.

    Starts from the reward vector unless ``init`` is given; the fixed
    point does not depend on the start (within 2*tol/(1-gamma)).
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if init is None:
        v = mdp.rewards.copy()
    else:
        v = np.array(init, dtype=np.float64)
        if v.shape != (mdp.num_states,):
            raise ValueError(f"init must have {mdp.num_states} entries")
    for _ in range(iteration_cap(mdp.gamma, tol)):
        nv = bellman_optimal_backup(mdp, v)
        delta = float(np.max(np.abs(nv - v))) if mdp.num_states else 0.0
        v = nv
        if delta < tol:
            return v
    raise ConvergenceError(f"value iteration did not reach tol={tol}")


def greedy_policy(mdp: TreeMdp, values: np.ndarray, support=None) -> StochasticPolicy:
    """Point-mass policy on the argmax of min-over-children values.

    Ties break toward the lowest action id. With ``support`` given, the
    argmax is restricted to masked-in actions and the result keeps that
    support; otherwise the policy is greedy with respect to the MDP alone.
    """
    values = np.asarray(values, dtype=np.float64)
    probs = np.zeros(mdp.num_pairs)
    if support is not None:
        support = np.asarray(support, dtype=bool)
        if support.shape != (mdp.num_pairs,):
            raise ValueError(f"support must have {mdp.num_pairs} pair entries")
    if mdp.num_pairs:
        pair_min = _pair_mins(mdp, values)
        for s in mdp.sweep_states:
            sl = mdp.pair_slice(int(s))
            scores = pair_min[sl]
            if support is not None:
                scores = np.where(support[sl], scores, -np.inf)
                if not np.isfinite(scores).any():
                    raise ValueError(f"state {s}: support masks out every action")
            probs[sl.start + int(np.argmax(scores))] = 1.0
    return StochasticPolicy(mdp, probs, support, check=False)


def estimated_depth(v: float, gamma: float) -> float:
    """Invert the depth penalty: the route length a value corresponds to."""
    if not 0.0 < gamma < 1.0:
        raise ValueError(f"gamma {gamma} outside (0, 1)")
    if v <= 0.0:
        raise UndefinedDepthError("value 0 means a dead end, whose depth is infinite")
    if v > 1.0:
        raise ValueError(f"value {v} above 1")
    if v == 1.0:
        return 0.0
    return math.log(v) / math.log(gamma)


# -- table I/O ----------------------------------------------------------------


def save_values_csv(path, values) -> None:
    """Write a value table as ``state,value`` rows (exact float round-trip)."""
    values = np.asarray(values, dtype=np.float64)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("state,value\n")
        for s, v in enumerate(values):
            fh.write(f"{s},{float(v)!r}\n")


def load_values_csv(path) -> np.ndarray:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != "state,value":
            raise ValueError(f"unexpected header {header!r}")
        rows = [line.split(",") for line in fh.read().splitlines() if line]
    out = np.zeros(len(rows))
    for s_txt, v_txt in rows:
        out[int(s_txt)] = float(v_txt)
    return out
