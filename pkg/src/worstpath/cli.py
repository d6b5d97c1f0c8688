"""Command-line front end: gen, train, eval, oracle-check."""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import envgen, harness, oracle, training, values
from .envgen import EnvConfig
from .training import TrainConfig


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="worstpath",
        description="Worst-path optimisation in tree-structured MDPs.",
    )
    sub = parser.add_subparsers(required=True)

    p = sub.add_parser("gen", help="generate a synthetic environment file")
    p.add_argument("--states", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--gamma", type=float, default=0.95)
    p.add_argument("--bb-fraction", type=float, default=0.35)
    p.add_argument("--dead-end-fraction", type=float, default=0.25)
    p.add_argument("--mask-fraction", type=float, default=0.15)
    p.add_argument("--max-actions", type=int, default=3)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_gen)

    p = sub.add_parser("train", help="train a policy on an environment file")
    p.add_argument("env")
    p.add_argument("--beta", type=float, default=10.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--iterations", type=int, default=40)
    p.add_argument("--fraction", type=float, default=1.0,
                   help="fraction of the solvable roots used for training")
    p.add_argument("--max-steps", type=int, default=60)
    p.add_argument("--trees-per-iter", type=int, default=36)
    p.add_argument("--updates-per-iter", type=int, default=5)
    p.add_argument("--workers", type=int, default=6)
    p.add_argument("--out", required=True, help="snapshot file to write")
    p.add_argument("--metrics", default=None, help="per-iteration metrics CSV")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="evaluate a snapshot under model-call budgets")
    p.add_argument("snapshot")
    p.add_argument("--budget", type=int, action="append", default=None,
                   help="repeatable; 0 means direct generation "
                        "(default: 0 100 200 500)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-targets", type=int, default=100)
    p.add_argument("--dg-max-steps", type=int, default=100)
    p.add_argument("--base-policy", action="store_true",
                   help="evaluate the base prior instead of the trained policy")
    p.add_argument("--out", required=True, help="report CSV to write")
    p.add_argument("--depth-out", default=None,
                   help="also write (estimated, realised) depth rows")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("oracle-check", help="run the brute-force property campaigns")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--envs", type=int, default=25, help="random environments per campaign")
    p.set_defaults(func=_cmd_oracle_check)

    return parser


def _cmd_gen(args) -> int:
    cfg = EnvConfig(
        num_states=args.states,
        max_actions_per_state=args.max_actions,
        bb_fraction=args.bb_fraction,
        dead_end_fraction=args.dead_end_fraction,
        base_mask_fraction=args.mask_fraction,
        seed=args.seed,
        gamma=args.gamma,
    )
    mdp, base = envgen.generate(cfg)
    envgen.save_env(args.out, mdp, base)
    n_solvable = len(envgen.solvable_states(mdp))
    print(f"wrote {args.out}: {mdp!r}, {n_solvable} solvable roots")
    return 0


def _cmd_train(args) -> int:
    mdp, base = envgen.load_env(args.env)
    roots = [int(s) for s in envgen.solvable_states(mdp)]
    if not roots:
        print("environment has no solvable roots", file=sys.stderr)
        return 1
    if args.fraction < 1.0:
        roots = harness.training_root_subset(roots, args.fraction, args.seed)
    cfg = TrainConfig(
        beta=args.beta,
        seed=args.seed,
        iterations=args.iterations,
        max_steps=args.max_steps,
        trees_per_iter=args.trees_per_iter,
        updates_per_iter=args.updates_per_iter,
        num_workers=args.workers,
    )
    pi, learner, metrics = training.train(mdp, base, roots, cfg, metrics_path=args.metrics)
    harness.save_snapshot(args.out, mdp, base, pi, learner.main)
    final = metrics[-1].dg_success_rate if metrics else float("nan")
    print(f"wrote {args.out}: trained {args.iterations} iterations, "
          f"final rollout success {final:.3f}")
    return 0


def _cmd_eval(args) -> int:
    mdp, base, pi, learned = harness.load_snapshot(args.snapshot)
    if args.base_policy:
        pi = base
    budgets = args.budget if args.budget else [0, 100, 200, 500]
    targets = [int(s) for s in envgen.solvable_states(mdp)[: args.max_targets]]
    rows = harness.evaluate_targets(mdp, pi, targets, budgets, args.seed, args.dg_max_steps)
    harness.write_report(args.out, rows)
    for b in budgets:
        label = "DG" if b == 0 else str(b)
        print(f"budget {label}: success {harness.success_rate(rows, b):.1f}%")
    if args.depth_out:
        rows_d, r = harness.depth_correlation(mdp, learned, pi, targets, args.dg_max_steps)
        with open(args.depth_out, "w", encoding="utf-8") as fh:
            fh.write("target,estimated_depth,realised_depth\n")
            for root, est, real in rows_d:
                fh.write(f"{root},{est!r},{real}\n")
        print(f"depth correlation: r={r:.3f} over {len(rows_d)} solved roots")
    return 0


def _cmd_oracle_check(args) -> int:
    rng = np.random.default_rng(args.seed)
    failures = 0

    def report(name: str, ok: bool, detail: str = "") -> None:
        nonlocal failures
        line = f"[{'PASS' if ok else 'FAIL'}] {name}"
        if detail:
            line += f" ({detail})"
        print(line)
        failures += 0 if ok else 1

    worst_ratio = 0.0
    bad = 0
    for _ in range(args.envs):
        cfg = EnvConfig(num_states=int(rng.integers(20, 120)), seed=int(rng.integers(2**31)))
        mdp, _ = envgen.generate(cfg)
        for _ in range(8):
            v1 = rng.random(mdp.num_states)
            v2 = rng.random(mdp.num_states)
            lhs = float(np.max(np.abs(
                values.bellman_optimal_backup(mdp, v1) - values.bellman_optimal_backup(mdp, v2))))
            rhs = mdp.gamma * float(np.max(np.abs(v1 - v2)))
            if rhs > 0:
                worst_ratio = max(worst_ratio, lhs / rhs)
            if lhs > rhs + 1e-14:
                bad += 1
    report("contraction", bad == 0, f"worst ratio {worst_ratio:.6f}")

    bad = 0
    for _ in range(args.envs):
        cfg = EnvConfig(num_states=int(rng.integers(10, 60)), seed=int(rng.integers(2**31)))
        mdp, _ = envgen.generate(cfg)
        lo = values.value_iteration(mdp, 1e-12, init=np.zeros(mdp.num_states))
        hi = values.value_iteration(mdp, 1e-12, init=np.ones(mdp.num_states))
        if float(np.max(np.abs(lo - hi))) > 1e-9:
            bad += 1
    report("fixed-point uniqueness", bad == 0, f"{args.envs} environments")

    bad = 0
    for _ in range(args.envs):
        cfg = EnvConfig(
            num_states=int(rng.integers(8, 14)),
            bb_fraction=0.4,
            seed=int(rng.integers(2**31)),
        )
        mdp, _ = envgen.generate(cfg)
        if oracle.count_deterministic_policies(mdp) > 10**5:
            continue
        vi = values.value_iteration(mdp, 1e-12)
        bf = oracle.brute_force_v_star(mdp)
        if float(np.max(np.abs(vi - bf))) > 1e-9:
            bad += 1
    report("value iteration vs brute force", bad == 0, f"{args.envs} environments")

    bad = 0
    for _ in range(args.envs):
        cfg = EnvConfig(num_states=int(rng.integers(8, 13)), seed=int(rng.integers(2**31)))
        mdp, base = envgen.generate(cfg)
        pi = base
        for _ in range(3):
            v = values.evaluate_policy(mdp, pi, 1e-12)
            nxt = training.policy_update_exact(pi, values.all_advantages(mdp, v), beta=1.0)
            if not oracle.check_improvement(mdp, pi, nxt).improved:
                bad += 1
                break
            pi = nxt
    report("monotonic improvement", bad == 0, f"{args.envs} environments, 3 rounds")

    return 1 if failures else 0


if __name__ == "__main__":
    raise SystemExit(main())
