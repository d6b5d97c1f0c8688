"""Acceptance suite.

Every criterion prints one [PASS]/[FAIL] line (run with ``pytest -s``).
A1-A6 are exact property campaigns against brute-force oracles; A7-A11
run the standard 500-state benchmark: five fixed environment seeds,
training with advantage weighting on and off, evaluation by direct
generation and budgeted search.
"""

import math
import time
from dataclasses import dataclass

import numpy as np
import pytest

from worstpath import (
    EnvConfig,
    StochasticPolicy,
    TrainConfig,
    all_advantages,
    bellman_optimal_backup,
    brute_force_v_star,
    budgeted_search,
    direct_generate,
    discount_power,
    evaluate_policy,
    explore,
    extract_successful_branches,
    generate,
    greedy_policy,
    is_successful,
    iter_deterministic_policies,
    load_env,
    monte_carlo_objective,
    policy_update_exact,
    route_length,
    solvable_states,
    train,
    tree_worst_path_return,
    value_iteration,
)
from worstpath.cli import main as cli_main
from worstpath.harness import depth_correlation

from conftest import FIXTURES, A


def check(label: str, ok: bool, detail: str = "") -> None:
    state = "PASS" if ok else "FAIL"
    suffix = f" ({detail})" if detail else ""
    print(f"[{state}] {label}{suffix}")
    assert ok, f"{label}{suffix}"


# -- A1-A5: property campaigns ---------------------------------------------------


def test_a1_contraction():
    rng = np.random.default_rng(11)
    t0 = time.perf_counter()
    triples = 0
    worst_ratio = 0.0
    violations = 0
    for _ in range(125):
        cfg = EnvConfig(
            num_states=int(rng.integers(20, 201)),
            dead_end_fraction=float(rng.uniform(0.0, 0.5)),
            seed=int(rng.integers(2**31)),
        )
        mdp, _ = generate(cfg)
        for _ in range(8):
            v1 = rng.random(mdp.num_states)
            v2 = rng.random(mdp.num_states)
            lhs = float(np.max(np.abs(
                bellman_optimal_backup(mdp, v1) - bellman_optimal_backup(mdp, v2))))
            rhs = mdp.gamma * float(np.max(np.abs(v1 - v2)))
            if lhs > rhs + 1e-14:  # one-ulp guard over the exact inequality
                violations += 1
            if rhs > 0:
                worst_ratio = max(worst_ratio, lhs / rhs)
            triples += 1
    elapsed = time.perf_counter() - t0
    check(
        "A1 contraction",
        violations == 0 and triples >= 1000 and elapsed < 10.0,
        f"{triples} triples, worst ratio {worst_ratio:.6f}, {elapsed:.1f}s",
    )


def test_a2_fixed_point_uniqueness():
    rng = np.random.default_rng(22)
    worst_gap = 0.0
    worst_residual = 0.0
    for _ in range(100):
        cfg = EnvConfig(num_states=int(rng.integers(10, 80)), seed=int(rng.integers(2**31)))
        mdp, _ = generate(cfg)
        lo = value_iteration(mdp, tol=1e-12, init=np.zeros(mdp.num_states))
        hi = value_iteration(mdp, tol=1e-12, init=np.ones(mdp.num_states))
        worst_gap = max(worst_gap, float(np.max(np.abs(lo - hi))))
        for v in (lo, hi):
            residual = float(np.max(np.abs(bellman_optimal_backup(mdp, v) - v)))
            worst_residual = max(worst_residual, residual)
    check(
        "A2 fixed-point uniqueness",
        worst_gap < 1e-9 and worst_residual < 1e-9,
        f"100 envs, init gap {worst_gap:.2e}, residual {worst_residual:.2e}",
    )


def test_a3_oracle_optimality():
    rng = np.random.default_rng(33)
    t0 = time.perf_counter()
    worst_vi = 0.0
    worst_greedy = 0.0
    count = 0
    while count < 100:
        cfg = EnvConfig(
            num_states=int(rng.integers(8, 16)),
            bb_fraction=0.4,
            max_actions_per_state=3,
            slow_route_fraction=0.0,
            seed=int(rng.integers(2**31)),
        )
        mdp, _ = generate(cfg)
        if int((~mdp.building_block).sum()) > 10:
            continue
        count += 1
        vi = value_iteration(mdp, tol=1e-12)
        bf = brute_force_v_star(mdp)
        worst_vi = max(worst_vi, float(np.max(np.abs(vi - bf))))
        v_greedy = evaluate_policy(mdp, greedy_policy(mdp, vi), tol=1e-12)
        worst_greedy = max(worst_greedy, float(np.max(np.abs(v_greedy - vi))))
    elapsed = time.perf_counter() - t0
    check(
        "A3 oracle optimality",
        worst_vi < 1e-9 and worst_greedy < 1e-9 and elapsed < 60.0,
        f"100 envs, vi gap {worst_vi:.2e}, greedy gap {worst_greedy:.2e}, {elapsed:.1f}s",
    )


def test_a4_monotonic_improvement():
    rng = np.random.default_rng(44)
    worst_drop = -math.inf
    for _ in range(200):
        cfg = EnvConfig(num_states=int(rng.integers(8, 13)), seed=int(rng.integers(2**31)))
        mdp, base = generate(cfg)
        for beta in (0.5, 1.0, 5.0):
            pi = base
            v = evaluate_policy(mdp, pi, tol=1e-12)
            for _ in range(5):
                pi = policy_update_exact(pi, all_advantages(mdp, v), beta=beta)
                v_next = evaluate_policy(mdp, pi, tol=1e-12)
                worst_drop = max(worst_drop, float(np.max(v - v_next)))
                v = v_next
    check(
        "A4 monotonic improvement",
        worst_drop <= 1e-9,
        f"200 envs x 3 betas x 5 rounds, worst drop {worst_drop:.2e}",
    )


def test_a5_rollout_value_consistency():
    rng = np.random.default_rng(55)
    finite = cyclic = 0
    for _ in range(100):
        cfg = EnvConfig(num_states=int(rng.integers(8, 13)), seed=int(rng.integers(2**31)))
        mdp, _ = generate(cfg)
        actions = [
            int(rng.integers(mdp.num_actions(s))) if mdp.num_actions(s) else 0
            for s in range(mdp.num_states)
        ]
        pi = StochasticPolicy.deterministic(mdp, actions)
        root = int(np.flatnonzero(~mdp.building_block)[0])
        cap = 200_000
        tree = explore(mdp, pi, root, cap, rng=np.random.default_rng(1))
        assert tree.num_expanded() < cap
        ret = tree_worst_path_return(tree, mdp)
        mean, stderr = monte_carlo_objective(
            mdp, pi, root, n=32, rng=np.random.default_rng(2), max_steps=cap
        )
        v = evaluate_policy(mdp, pi, tol=1e-10)
        assert stderr == 0.0
        assert mean == ret
        if tree.has_unexpanded():
            cyclic += 1
            assert mean == 0.0
            assert v[root] <= 1e-10 / (1.0 - mdp.gamma) + 1e-15
        else:
            finite += 1
            assert mean == v[root]
    check(
        "A5 rollout/value consistency",
        finite + cyclic == 100,
        f"{finite} finite realisations exact, {cyclic} cyclic near-zero",
    )


def test_a6_figure_fixture():
    mdp, _ = load_env(FIXTURES / "figure_tree.env")
    pi = StochasticPolicy.deterministic(mdp, np.zeros(8, dtype=int))
    full = explore(mdp, pi, A, max_steps=10, rng=np.random.default_rng(0))
    truncated = explore(mdp, pi, A, max_steps=3, rng=np.random.default_rng(0))
    left_value = tree_worst_path_return(full, mdp)
    right_value = tree_worst_path_return(truncated, mdp)
    check(
        "A6 figure fixture",
        left_value == discount_power(0.95, 4)
        and abs(left_value - 0.95**4) < 1e-15
        and right_value == 0.0
        and route_length(full) == 4,
        f"left {left_value:.6f} = gamma^4, right {right_value}, length {route_length(full)}",
    )


# -- A7-A11: the standard benchmark ----------------------------------------------

BENCH_SEEDS = (0, 1, 2, 3, 4)
BENCH_ENV = dict(
    num_states=500,
    max_actions_per_state=4,
    child_count_weights=(0.7, 0.25, 0.05),
    bb_fraction=0.3,
    dead_end_fraction=0.45,
    bb_child_bias=0.3,
    slow_route_fraction=0.5,
    base_mask_fraction=0.15,
    gamma=0.95,
)
BENCH_TRAIN = dict(
    iterations=80,
    trees_per_iter=72,
    target_rate=0.2,
    max_steps=80,
    num_workers=6,
)
DG_MAX_STEPS = 100


@dataclass
class SeedRun:
    mdp: object
    base: object
    roots: list
    pi_plain: object  # trained with beta = 0
    pi_weighted: object  # trained with beta = 10
    learner_weighted: object
    base_trees: dict
    weighted_trees: dict
    base_dg: float
    plain_dg: float
    weighted_dg: float


@pytest.fixture(scope="module")
def benchmark():
    t0 = time.perf_counter()
    runs = {}
    for seed in BENCH_SEEDS:
        mdp, base = generate(EnvConfig(seed=seed, **BENCH_ENV))
        roots = [int(s) for s in solvable_states(mdp)[:100]]
        assert len(roots) >= 100
        base_trees = {r: direct_generate(mdp, base, r, DG_MAX_STEPS) for r in roots}
        policies = {}
        learners = {}
        for beta in (0.0, 10.0):
            cfg = TrainConfig(beta=beta, seed=seed, **BENCH_TRAIN)
            policies[beta], learners[beta], _ = train(mdp, base, roots, cfg)
        weighted_trees = {
            r: direct_generate(mdp, policies[10.0], r, DG_MAX_STEPS) for r in roots
        }
        plain_dg = float(np.mean(
            [direct_generate(mdp, policies[0.0], r, DG_MAX_STEPS)[0] for r in roots]))
        runs[seed] = SeedRun(
            mdp=mdp,
            base=base,
            roots=roots,
            pi_plain=policies[0.0],
            pi_weighted=policies[10.0],
            learner_weighted=learners[10.0],
            base_trees=base_trees,
            weighted_trees=weighted_trees,
            base_dg=float(np.mean([t[0] for t in base_trees.values()])),
            plain_dg=plain_dg,
            weighted_dg=float(np.mean([t[0] for t in weighted_trees.values()])),
        )
        print(f"benchmark seed {seed}: base {runs[seed].base_dg:.2f}, "
              f"beta0 {plain_dg:.2f}, beta10 {runs[seed].weighted_dg:.2f}")
    elapsed = time.perf_counter() - t0
    print(f"benchmark built in {elapsed:.1f}s")
    assert elapsed < 600.0
    return runs


def test_a7_training_efficacy(benchmark):
    base_rate = 100.0 * np.mean([r.base_dg for r in benchmark.values()])
    trained_rate = 100.0 * np.mean([r.weighted_dg for r in benchmark.values()])
    ordering = all(r.weighted_dg >= r.plain_dg for r in benchmark.values())
    check(
        "A7 training efficacy",
        trained_rate - base_rate >= 30.0 and ordering,
        f"DG {base_rate:.1f}% -> {trained_rate:.1f}% "
        f"(+{trained_rate - base_rate:.1f}pts), beta10 >= beta0 on every seed: {ordering}",
    )


def test_a8_route_length_trend(benchmark):
    wins = 0
    details = []
    for seed, run in benchmark.items():
        common = [
            r for r in run.roots
            if run.base_trees[r][0] and run.weighted_trees[r][0]
        ]
        base_len = np.mean([route_length(run.base_trees[r][1]) for r in common])
        trained_len = np.mean([route_length(run.weighted_trees[r][1]) for r in common])
        wins += trained_len <= base_len
        details.append(f"s{seed}:{base_len:.2f}->{trained_len:.2f}")
    check("A8 route-length trend", wins >= 4, f"{wins}/5 seeds shorter ({', '.join(details)})")


def test_a9_budget_monotonicity(benchmark):
    budgets = (10, 50, 100)
    ok = True
    trained_beats_base = True
    for seed, run in benchmark.items():
        sub = run.roots[:40]
        final = {}
        for name, pi in (("base", run.base), ("trained", run.pi_weighted)):
            rates = [np.mean([direct_generate(run.mdp, pi, r, budgets[0])[0] for r in sub])]
            for b in budgets:
                rates.append(np.mean([
                    budgeted_search(run.mdp, pi, r, b, np.random.SeedSequence((seed, r)))[0]
                    for r in sub
                ]))
            if not all(rates[i] <= rates[i + 1] for i in range(len(rates) - 1)):
                ok = False
                print(f"  violation: seed {seed} {name}: {rates}")
            final[name] = rates[-1]
        trained_beats_base &= final["trained"] > final["base"]
    check(
        "A9 budget monotonicity",
        ok and trained_beats_base,
        "budgets DG,10,50,100 x 2 policies x 5 seeds; trained beats base at 100",
    )


def test_a10_depth_estimation(benchmark):
    est_all, real_all = [], []
    per_seed = []
    for seed, run in benchmark.items():
        rows, r = depth_correlation(
            run.mdp, run.learner_weighted.main, run.pi_weighted, run.roots, DG_MAX_STEPS
        )
        per_seed.append(f"s{seed}:{r:.2f}")
        est_all.extend(row[1] for row in rows)
        real_all.extend(row[2] for row in rows)
    pooled = float(np.corrcoef(est_all, real_all)[0, 1])
    check(
        "A10 depth estimation",
        pooled > 0.5,
        f"pooled r={pooled:.3f} over {len(est_all)} solved roots ({', '.join(per_seed)})",
    )


def test_a11_reproducibility(tmp_path):
    env_path = tmp_path / "env.txt"
    assert cli_main(["gen", "--states", "80", "--seed", "3", "--out", str(env_path)]) == 0

    def run(tag: str):
        snap = tmp_path / f"{tag}.snap"
        metrics = tmp_path / f"{tag}.metrics.csv"
        report = tmp_path / f"{tag}.report.csv"
        assert cli_main([
            "train", str(env_path), "--beta", "10", "--seed", "7",
            "--iterations", "6", "--trees-per-iter", "12", "--workers", "4",
            "--out", str(snap), "--metrics", str(metrics),
        ]) == 0
        assert cli_main([
            "eval", str(snap), "--budget", "0", "--budget", "10", "--budget", "25",
            "--seed", "7", "--max-targets", "25", "--out", str(report),
        ]) == 0
        return snap.read_bytes(), metrics.read_bytes(), report.read_bytes()

    first = run("first")
    second = run("second")
    check(
        "A11 reproducibility",
        first == second,
        "snapshot, metrics CSV and report CSV byte-identical across reruns",
    )
