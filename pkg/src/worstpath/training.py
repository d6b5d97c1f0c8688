"""Self-imitation training on worst-path values.

One iteration: roll out synthetic trees with the current policy, keep
only branches that belong to successful subtrees (every leaf a building
block), push them into a FIFO replay buffer, then take a few tabular
learning steps. Values regress on the bootstrapped worst-child target
through a slowly tracking target table; the policy clones buffered
actions weighted by the clipped exponential of their advantage, so
better-than-average decisions are reinforced hardest. Support inherited
from the base policy is never violated: masked-out actions keep
probability zero through every update.
"""

from __future__ import annotations

import csv
import math
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .mdp import TreeMdp
from .trees import Branch, NodeStatus, SynTree
from .values import StochasticPolicy, tree_worst_path_return

_EXP_CLAMP = 700.0  # largest safe argument to exp


class EmptyBufferError(RuntimeError):
    """Sampling was requested from a buffer with no entries."""


class SupportViolationError(ValueError):
    """A branch action falls outside the policy's support mask."""


class DegeneratePolicyError(ValueError):
    """A reweighted state lost all probability mass."""


# -- rollouts -----------------------------------------------------------------


def explore(
    mdp: TreeMdp,
    pi: StochasticPolicy,
    root: int,
    max_steps: int,
    rng: np.random.Generator | None = None,
    greedy: bool = False,
) -> SynTree:
    """Build a synthetic tree by FIFO expansion.

    Pop a pending state, draw an action from ``pi`` (or its argmax when
    ``greedy``), attach the children, enqueue the non-building-block
    ones. One expansion is one step, the unit of the model-call budget.
    Stops when the queue empties or ``max_steps`` expansions are spent;
    whatever remains queued stays unexpanded. A child repeating one of
    its ancestors is attached but treated as a dead end rather than
    enqueued, so a looping lineage cannot eat the whole step budget.

    A building-block root yields the single-node tree at zero steps.
    """
    if max_steps < 1:
        raise ValueError("max_steps must be at least 1")
    tree = SynTree(root, bool(mdp.building_block[root]))
    if mdp.building_block[root]:
        return tree
    queue = deque([tree.root])
    steps = 0
    while queue and steps < max_steps:
        idx = queue.popleft()
        s = tree.nodes[idx].state
        a = pi.argmax_action(s) if greedy else pi.sample_action(s, rng)
        lineage = tree.ancestor_states(idx)
        tree.mark_expanded(idx, a)
        for c in mdp.expand(s, a):
            child_idx = tree.attach(idx, c, bool(mdp.building_block[c]))
            if not mdp.building_block[c] and c not in lineage:
                queue.append(child_idx)
        steps += 1
    return tree


def _success_flags(tree: SynTree) -> np.ndarray:
    """Per node: does every leaf below it carry building-block status?

    Nodes are stored in creation order, so children always follow their
    parent; one reverse sweep settles the whole tree.
    """
    flags = np.zeros(len(tree.nodes), dtype=bool)
    for i in range(len(tree.nodes) - 1, -1, -1):
        node = tree.nodes[i]
        if node.is_leaf:
            flags[i] = node.status is NodeStatus.BUILDING_BLOCK
        else:
            flags[i] = all(flags[c] for c in node.children)
    return flags


def is_successful(tree: SynTree, node: int) -> bool:
    """True iff the subtree rooted at ``node`` ends entirely on building blocks."""
    if not 0 <= node < len(tree.nodes):
        raise IndexError(f"node {node} out of range")
    return bool(_success_flags(tree)[node])


def extract_successful_branches(tree: SynTree) -> list:
    """Branches of every maximal successful subtree.

    A successful subtree is maximal when its parent's subtree is not
    itself successful. Each expanded node contributes exactly one
    branch; ordering is breadth-first starting from the shallowest
    successful root.
    """
    flags = _success_flags(tree)
    roots = [
        i
        for i in range(len(tree.nodes))
        if flags[i]
        and (tree.nodes[i].parent is None or not flags[tree.nodes[i].parent])
    ]
    roots.sort(key=lambda i: (tree.nodes[i].depth, i))
    branches = []
    for r in roots:
        for i in tree.subtree_indices(r):
            node = tree.nodes[i]
            if node.status is NodeStatus.EXPANDED:
                branches.append(
                    Branch(
                        state=node.state,
                        action=node.action,
                        children=tuple(tree.nodes[c].state for c in node.children),
                    )
                )
    return branches


# -- replay -------------------------------------------------------------------


class ReplayBuffer:
    """FIFO branch store with strict oldest-first eviction."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self.entries = deque(maxlen=capacity)

    def push(self, branches) -> None:
        self.entries.extend(branches)

    def sample(self, n: int, rng: np.random.Generator) -> list:
        """``n`` uniform draws with replacement."""
        if not self.entries:
            raise EmptyBufferError("cannot sample from an empty buffer")
        if n < 0:
            raise ValueError("n must be non-negative")
        idx = rng.integers(0, len(self.entries), size=n)
        return [self.entries[int(i)] for i in idx]

    def __len__(self) -> int:
        return len(self.entries)


# -- learners -----------------------------------------------------------------


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters for the self-imitation loop.

    ``beta`` scales advantages inside the imitation weight
    exp_clip(beta * A), whose output is capped at ``clip_c``. Collection
    runs ``num_workers`` concurrent rollouts against a policy snapshot,
    gathering ``trees_per_iter`` trees per iteration, followed by
    ``updates_per_iter`` value and policy steps on fresh buffer samples.
    """

    beta: float = 10.0
    clip_c: float = 20.0
    buffer_capacity: int = 20000
    trees_per_iter: int = 36
    updates_per_iter: int = 5
    num_workers: int = 6
    max_steps: int = 60
    value_lr: float = 0.5
    policy_lr: float = 0.1
    target_rate: float = 0.05
    batch_size: int = 256
    iterations: int = 40
    seed: int = 0

    def __post_init__(self):
        if self.beta < 0:
            raise ValueError("beta must be non-negative")
        if self.clip_c <= 0:
            raise ValueError("clip_c must be positive")
        if not 0.0 < self.value_lr <= 1.0:
            raise ValueError("value_lr must lie in (0, 1]")
        if not 0.0 < self.target_rate <= 1.0:
            raise ValueError("target_rate must lie in (0, 1]")
        if self.policy_lr <= 0:
            raise ValueError("policy_lr must be positive")
        if self.iterations < 0:
            raise ValueError("iterations must be non-negative")
        for name in ("buffer_capacity", "trees_per_iter", "updates_per_iter",
                     "num_workers", "max_steps", "batch_size"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")


@dataclass
class TabularValueLearner:
    """Main value table plus its slowly tracking bootstrap copy."""

    main: np.ndarray
    target: np.ndarray

    @classmethod
    def from_mdp(cls, mdp: TreeMdp) -> "TabularValueLearner":
        return cls(main=mdp.rewards.copy(), target=mdp.rewards.copy())

    def copy(self) -> "TabularValueLearner":
        return TabularValueLearner(self.main.copy(), self.target.copy())


def value_update(
    learner: TabularValueLearner,
    mdp: TreeMdp,
    batch,
    lr: float,
    target_rate: float = 0.05,
) -> TabularValueLearner:
    """One squared-error step per branch toward the bootstrapped target.

    The regression target is r(s) + gamma * (1 - r(s)) * min over the
    branch children of the target table; branches apply in batch order,
    then the target table blends toward the main one. Building blocks
    stay pinned at exactly 1 in both tables.
    """
    out = learner.copy()
    for br in batch:
        if mdp.building_block[br.state]:
            continue
        y = mdp.gamma * min(float(out.target[c]) for c in br.children)
        out.main[br.state] += lr * (y - out.main[br.state])
    out.target += target_rate * (out.main - out.target)
    out.main[mdp.building_block] = 1.0
    out.target[mdp.building_block] = 1.0
    return out


def imitation_weights(advantages, beta: float, clip_c: float) -> np.ndarray:
    """exp_clip(beta * A): exponential with output capped at ``clip_c``."""
    scaled = np.minimum(beta * np.asarray(advantages, dtype=np.float64), _EXP_CLAMP)
    return np.minimum(np.exp(scaled), clip_c)


def policy_update_sampled(
    pi: StochasticPolicy,
    learner: TabularValueLearner,
    mdp: TreeMdp,
    batch,
    cfg: TrainConfig,
    lr: float,
) -> StochasticPolicy:
    """One gradient step of advantage-weighted behaviour cloning.

    Minimises -sum_batch w * log pi(a|s) over per-state logits of
    masked-in actions, where w = exp_clip(beta * A) with advantages read
    from the learner's main table. Masked-out actions keep probability
    zero; a branch whose action lies outside the support is an error.
    """
    by_state: dict[int, list] = {}
    for br in batch:
        k = mdp.pair_index(br.state, br.action)
        if not pi.support[k]:
            raise SupportViolationError(
                f"branch action {br.action} at state {br.state} is outside the support"
            )
        by_state.setdefault(br.state, []).append(br)

    new_probs = pi.probs.copy()
    scale = lr
    for s, items in by_state.items():
        sl = mdp.pair_slice(s)
        keep = pi.support[sl]
        p = pi.probs[sl][keep]
        z = np.log(np.maximum(p, 1e-300))
        grad = np.zeros(p.size)
        local = {a: j for j, a in enumerate(np.flatnonzero(keep))}
        for br in items:
            q = mdp.gamma * min(float(learner.main[c]) for c in br.children)
            adv = q - float(learner.main[s])
            w = float(imitation_weights(adv, cfg.beta, cfg.clip_c))
            grad -= w * p
            grad[local[br.action]] += w
        z += scale * grad
        z -= z.max()
        e = np.exp(z)
        block = np.zeros(keep.size)
        block[keep] = e / e.sum()
        new_probs[sl] = block
    return StochasticPolicy(mdp, new_probs, pi.support, check=False)


def policy_update_exact(
    pi: StochasticPolicy, advantages, beta: float
) -> StochasticPolicy:
    """Closed-form reweight: pi'(a|s) proportional to pi(a|s) * exp(beta * A).

    ``advantages`` lives on the flat pair layout. Support zeros stay
    zero because they multiply; every non-terminal state must keep a
    positive normaliser.
    """
    mdp = pi.mdp
    advantages = np.asarray(advantages, dtype=np.float64)
    if advantages.shape != (mdp.num_pairs,):
        raise ValueError(f"advantages must have {mdp.num_pairs} pair entries")
    weighted = pi.probs * np.exp(np.minimum(beta * advantages, _EXP_CLAMP))
    new_probs = np.zeros_like(weighted)
    for s in mdp.sweep_states:
        sl = mdp.pair_slice(int(s))
        z = float(weighted[sl].sum())
        if z <= 0.0:
            raise DegeneratePolicyError(f"state {s}: all reweighted mass vanished")
        new_probs[sl] = weighted[sl] / z
    return StochasticPolicy(mdp, new_probs, pi.support, check=False)


# -- the loop -------------------------------------------------------------------


@dataclass(frozen=True)
class IterationMetrics:
    iteration: int
    trees_collected: int
    branches_added: int
    buffer_size: int
    dg_success_rate: float
    mean_worst_path_return: float
    mean_route_length: float


METRICS_FIELDS = (
    "iteration",
    "trees_collected",
    "branches_added",
    "buffer_size",
    "dg_success_rate",
    "mean_worst_path_return",
    "mean_route_length",
)


def _root_cycler(roots, rng: np.random.Generator):
    """Round-robin over the training roots, reshuffled once per epoch."""
    roots = list(roots)
    while True:
        order = rng.permutation(len(roots))
        for i in order:
            yield roots[int(i)]


def train(
    mdp: TreeMdp,
    base: StochasticPolicy,
    roots,
    cfg: TrainConfig,
    metrics_path=None,
):
    """Run the full self-imitation loop.

    Starts from the base policy (whose nonzero entries define the
    support), collects ``trees_per_iter`` rollouts per iteration from
    the cycled roots, extracts successful branches into the buffer, then
    alternates value and policy updates on fresh samples. Rollouts run
    on up to ``num_workers`` threads against an immutable policy
    snapshot and merge in submission order, so results are reproducible
    bit-for-bit for a given seed regardless of worker count.

    Returns (policy, learner, per-iteration metrics).
    """
    if not len(roots):
        raise ValueError("at least one training root is required")
    pi = StochasticPolicy(mdp, base.probs, base.probs > 0.0, check=False)
    learner = TabularValueLearner.from_mdp(mdp)
    buffer = ReplayBuffer(cfg.buffer_capacity)

    seq = np.random.SeedSequence(cfg.seed)
    roots_seq, sample_seq, tree_seq = seq.spawn(3)
    rng_roots = np.random.default_rng(roots_seq)
    rng_sample = np.random.default_rng(sample_seq)
    cycler = _root_cycler(roots, rng_roots)

    metrics = []
    writer = _MetricsWriter(metrics_path) if metrics_path else None
    try:
        for it in range(cfg.iterations):
            batch_roots = [next(cycler) for _ in range(cfg.trees_per_iter)]
            rngs = [np.random.default_rng(s) for s in tree_seq.spawn(len(batch_roots))]
            snapshot = pi.copy()
            if cfg.num_workers > 1:
                with ThreadPoolExecutor(max_workers=cfg.num_workers) as pool:
                    trees = list(
                        pool.map(
                            lambda args: explore(mdp, snapshot, args[0], cfg.max_steps, args[1]),
                            zip(batch_roots, rngs),
                        )
                    )
            else:
                trees = [
                    explore(mdp, snapshot, r, cfg.max_steps, g)
                    for r, g in zip(batch_roots, rngs)
                ]

            added = 0
            successes = 0
            returns = []
            lengths = []
            for tree in trees:
                branches = extract_successful_branches(tree)
                if is_successful(tree, tree.root):
                    successes += 1
                    lengths.append(tree.num_expanded())
                buffer.push(branches)
                added += len(branches)
                returns.append(tree_worst_path_return(tree, mdp))

            for _ in range(cfg.updates_per_iter):
                if not len(buffer):
                    break
                batch = buffer.sample(cfg.batch_size, rng_sample)
                learner = value_update(learner, mdp, batch, cfg.value_lr, cfg.target_rate)
                pi = policy_update_sampled(pi, learner, mdp, batch, cfg, cfg.policy_lr)

            row = IterationMetrics(
                iteration=it,
                trees_collected=len(trees),
                branches_added=added,
                buffer_size=len(buffer),
                dg_success_rate=successes / len(trees),
                mean_worst_path_return=float(np.mean(returns)),
                mean_route_length=float(np.mean(lengths)) if lengths else math.nan,
            )
            metrics.append(row)
            if writer:
                writer.append(row)
    finally:
        if writer:
            writer.close()
    return pi, learner, metrics


class _MetricsWriter:
    def __init__(self, path):
        self._fh = open(path, "w", encoding="utf-8", newline="")
        self._writer = csv.writer(self._fh)
        self._writer.writerow(METRICS_FIELDS)

    def append(self, row: IterationMetrics) -> None:
        self._writer.writerow(
            [
                row.iteration,
                row.trees_collected,
                row.branches_added,
                row.buffer_size,
                repr(row.dg_success_rate),
                repr(row.mean_worst_path_return),
                repr(row.mean_route_length),
            ]
        )
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()
