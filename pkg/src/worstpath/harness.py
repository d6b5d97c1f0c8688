"""Benchmark harness: direct generation, budgeted search, reports.

Direct generation (DG) is a single greedy rollout with no search.
Budgeted search restarts stochastic rollouts against a shared budget of
expansions; the first attempt is always the greedy one, and each
attempt draws from its own seed substream indexed by attempt number,
which makes success monotone in the budget: a run that succeeds within
budget b replays identically under any larger budget.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .envgen import EnvConfig, deserialize, generate, serialize, solvable_states
from .mdp import TreeMdp
from .trees import SynTree
from .training import TrainConfig, explore, is_successful, train
from .values import StochasticPolicy, estimated_depth, tree_worst_path_return

REPORT_HEADER = ("target", "budget", "success", "calls", "route_length", "worst_path_return")


class NotSolvedError(RuntimeError):
    """Route length was requested for a tree that is not successful."""


def direct_generate(mdp: TreeMdp, pi: StochasticPolicy, root: int, max_steps: int):
    """One greedy rollout; returns (success, tree)."""
    tree = explore(mdp, pi, root, max_steps, rng=None, greedy=True)
    return is_successful(tree, tree.root), tree


def _as_seed_sequence(rng) -> np.random.SeedSequence:
    if isinstance(rng, np.random.SeedSequence):
        return rng
    if isinstance(rng, np.random.Generator):
        return np.random.SeedSequence(int(rng.integers(0, 2**63)))
    return np.random.SeedSequence(rng)


def budgeted_search(mdp: TreeMdp, pi: StochasticPolicy, root: int, budget: int, rng):
    """Restarted rollouts under a shared expansion budget.

    Returns (success, tree, calls_used) where the tree is the first
    successful one, or the best (highest worst-path return) attempt when
    the budget runs out. ``rng`` may be a Generator, SeedSequence or
    plain seed; attempt k always draws from substream k.
    """
    if budget < 1:
        raise ValueError("budget must be at least 1")
    seq = _as_seed_sequence(rng)
    remaining = budget
    best_tree, best_ret = None, -1.0
    attempt = 0
    while remaining > 0:
        arng = np.random.default_rng(seq.spawn(1)[0])
        tree = explore(mdp, pi, root, remaining, arng, greedy=(attempt == 0))
        used = tree.num_expanded()
        remaining -= used
        ret = tree_worst_path_return(tree, mdp)
        if best_tree is None or ret > best_ret:
            best_tree, best_ret = tree, ret
        if is_successful(tree, tree.root):
            return True, tree, budget - remaining
        if used == 0:
            break
        attempt += 1
    return False, best_tree, budget - remaining


def route_length(tree: SynTree) -> int:
    """Number of reactions (expanded nodes) in a successful tree."""
    if not is_successful(tree, tree.root):
        raise NotSolvedError("tree is not successful at its root")
    return tree.num_expanded()


# -- report rows ----------------------------------------------------------------


@dataclass(frozen=True)
class EvalRow:
    target: int
    budget: int  # 0 means direct generation
    success: bool
    calls: int
    route_length: int | None
    worst_path_return: float


def evaluate_targets(
    mdp: TreeMdp,
    pi: StochasticPolicy,
    targets,
    budgets,
    seed: int,
    dg_max_steps: int = 100,
):
    """Evaluate every target at every budget; budget 0 is direct generation."""
    rows = []
    for target in targets:
        target = int(target)
        for budget in budgets:
            if budget == 0:
                success, tree = direct_generate(mdp, pi, target, dg_max_steps)
                calls = tree.num_expanded()
            else:
                success, tree, calls = budgeted_search(
                    mdp, pi, target, int(budget),
                    np.random.SeedSequence((seed, target)),
                )
            rows.append(
                EvalRow(
                    target=target,
                    budget=int(budget),
                    success=success,
                    calls=calls,
                    route_length=route_length(tree) if success else None,
                    worst_path_return=tree_worst_path_return(tree, mdp),
                )
            )
    return rows


def write_report(path, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(REPORT_HEADER)
        for r in rows:
            writer.writerow(
                [
                    r.target,
                    r.budget,
                    int(r.success),
                    r.calls,
                    "" if r.route_length is None else r.route_length,
                    repr(r.worst_path_return),
                ]
            )


def read_report(path):
    rows = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader))
        if header != REPORT_HEADER:
            raise ValueError(f"unexpected report header {header}")
        for rec in reader:
            rows.append(
                EvalRow(
                    target=int(rec[0]),
                    budget=int(rec[1]),
                    success=bool(int(rec[2])),
                    calls=int(rec[3]),
                    route_length=None if rec[4] == "" else int(rec[4]),
                    worst_path_return=float(rec[5]),
                )
            )
    return rows


def success_rate(rows, budget: int) -> float:
    """Percentage of targets solved at the given budget."""
    hits = [r.success for r in rows if r.budget == budget]
    if not hits:
        return 0.0
    return 100.0 * sum(hits) / len(hits)


def mean_route_length(rows, budget: int, targets=None) -> float:
    """Mean reactions over solved targets, optionally restricted to a subset."""
    lengths = [
        r.route_length
        for r in rows
        if r.budget == budget
        and r.success
        and (targets is None or r.target in targets)
    ]
    return float(np.mean(lengths)) if lengths else math.nan


# -- snapshots --------------------------------------------------------------------
#
# A snapshot is the environment document extended with the trained
# policy and value table:
#   pi <s> <p1> <p2> ...
#   v <s> <value>


def save_snapshot(path, mdp, base, pi, values) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(serialize(mdp, base))
        for s in range(mdp.num_states):
            if mdp.num_actions(s) == 0:
                continue
            fh.write(f"pi {s} " + " ".join(repr(float(p)) for p in pi.at(s)) + "\n")
        for s in range(mdp.num_states):
            fh.write(f"v {s} {float(values[s])!r}\n")


def load_snapshot(path):
    """Read back (mdp, base, policy, values) from a snapshot file."""
    env_lines, pi_lines, v_lines = [], [], []
    with open(path, encoding="utf-8") as fh:
        for raw in fh:
            tag = raw.split(maxsplit=1)[0] if raw.strip() else ""
            if tag == "pi":
                pi_lines.append(raw.split())
            elif tag == "v":
                v_lines.append(raw.split())
            else:
                env_lines.append(raw.rstrip("\n"))
    mdp, base = deserialize("\n".join(env_lines))
    probs = np.zeros(mdp.num_pairs)
    for fields in pi_lines:
        s = int(fields[1])
        row = [float(f) for f in fields[2:]]
        if len(row) != mdp.num_actions(s):
            raise ValueError(f"snapshot pi row for state {s} has wrong arity")
        probs[mdp.pair_slice(s)] = row
    values = np.zeros(mdp.num_states)
    for fields in v_lines:
        values[int(fields[1])] = float(fields[2])
    pi = StochasticPolicy(mdp, probs, base.probs > 0.0)
    return mdp, base, pi, values


# -- diagnostics ------------------------------------------------------------------


def depth_correlation(mdp, learned_values, pi, roots, dg_max_steps: int = 100):
    """Estimated versus realised decomposition depth on solved roots.

    For every root solved by direct generation (and with a positive
    learned value, otherwise its depth estimate is undefined) the row is
    (root, depth from the learned value, max leaf depth of the DG tree).
    Returns (rows, Pearson correlation), with NaN correlation when there
    are fewer than two rows.
    """
    rows = []
    for root in roots:
        root = int(root)
        success, tree = direct_generate(mdp, pi, root, dg_max_steps)
        if not success or learned_values[root] <= 0.0:
            continue
        est = estimated_depth(float(learned_values[root]), mdp.gamma)
        rows.append((root, est, tree.max_depth()))
    if len(rows) < 2:
        return rows, math.nan
    est = np.array([r[1] for r in rows])
    real = np.array([r[2] for r in rows], dtype=np.float64)
    if est.std() == 0.0 or real.std() == 0.0:
        return rows, math.nan
    return rows, float(np.corrcoef(est, real)[0, 1])


# -- experiment orchestration -----------------------------------------------------


@dataclass(frozen=True)
class EvalConfig:
    """One experiment: environments, training setup, evaluation grid."""

    env: EnvConfig | str = field(default_factory=EnvConfig)
    budgets: tuple = (0, 100, 200, 500)
    seeds: tuple = (0,)
    targets: tuple | None = None
    max_targets: int = 100
    dg_max_steps: int = 100
    train_cfg: TrainConfig | None = None
    fraction: float = 1.0
    out: str = "report"

    def __post_init__(self):
        if not self.budgets:
            raise ValueError("at least one budget is required")
        if any(b < 0 for b in self.budgets):
            raise ValueError("budgets must be non-negative (0 means direct generation)")
        if not 0.0 < self.fraction <= 1.0:
            raise ValueError("fraction must lie in (0, 1]")


@dataclass
class EvalReport:
    success_rates: dict  # budget -> mean % over seeds
    route_lengths: dict  # budget -> mean length over seeds (solved targets)
    rows: dict  # seed -> list[EvalRow]
    report_paths: dict  # seed -> csv path


def _experiment_env(cfg: EvalConfig, seed: int):
    if isinstance(cfg.env, EnvConfig):
        return generate(replace(cfg.env, seed=seed))
    from .envgen import load_env

    return load_env(cfg.env)


def training_root_subset(roots, fraction: float, seed: int):
    if fraction >= 1.0:
        return list(roots)
    k = max(1, math.ceil(fraction * len(roots)))
    shuffled = np.random.default_rng(np.random.SeedSequence((seed, len(roots)))).permutation(roots)
    return [int(s) for s in shuffled[:k]]


def run_experiment(cfg: EvalConfig) -> EvalReport:
    """Train (when configured) and evaluate on every seed.

    Writes one report CSV per seed plus a cross-seed summary; returns
    the aggregated :class:`EvalReport`. Deterministic per seed list.
    """
    all_rows, paths = {}, {}
    for seed in cfg.seeds:
        mdp, base = _experiment_env(cfg, seed)
        if cfg.targets is not None:
            targets = [int(t) for t in cfg.targets]
        else:
            targets = [int(s) for s in solvable_states(mdp)[: cfg.max_targets]]
        if not targets:
            raise ValueError(f"seed {seed}: no evaluation targets available")

        pi = base
        if cfg.train_cfg is not None:
            train_roots = training_root_subset(targets, cfg.fraction, seed)
            tc = replace(cfg.train_cfg, seed=seed)
            pi, _, _ = train(mdp, base, train_roots, tc)

        rows = evaluate_targets(mdp, pi, targets, cfg.budgets, seed, cfg.dg_max_steps)
        path = f"{cfg.out}.seed{seed}.csv"
        write_report(path, rows)
        all_rows[seed] = rows
        paths[seed] = path

    rates = {
        b: float(np.mean([success_rate(rows, b) for rows in all_rows.values()]))
        for b in cfg.budgets
    }
    lengths = {}
    for b in cfg.budgets:
        per_seed = [mean_route_length(rows, b) for rows in all_rows.values()]
        per_seed = [x for x in per_seed if not math.isnan(x)]
        lengths[b] = float(np.mean(per_seed)) if per_seed else math.nan

    summary_path = f"{cfg.out}.summary.csv"
    with open(summary_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["budget", "mean_success_rate", "mean_route_length"])
        for b in cfg.budgets:
            writer.writerow([b, repr(rates[b]), repr(lengths[b])])

    return EvalReport(
        success_rates=rates, route_lengths=lengths, rows=all_rows, report_paths=paths
    )
