"""Desk-scale benchmark sweeps: budgets, advantage coefficient, data fraction.

Writes report CSVs next to this script (under ./out). Expect a couple
of minutes of wall time; shrink ITERATIONS or SEEDS to go faster.
"""

from pathlib import Path

import numpy as np

from worstpath import (
    EnvConfig,
    TrainConfig,
    budgeted_search,
    direct_generate,
    generate,
    solvable_states,
    train,
)

OUT = Path(__file__).parent / "out"
OUT.mkdir(exist_ok=True)

ENV = EnvConfig(num_states=300, max_actions_per_state=4, child_count_weights=(0.7, 0.25, 0.05),
                dead_end_fraction=0.45, bb_child_bias=0.25, slow_route_fraction=0.5, seed=0)
SEEDS = (0, 1, 2)
ITERATIONS = 25

mdp, base = generate(ENV)
roots = [int(s) for s in solvable_states(mdp)][:60]
dg = lambda pi: 100.0 * np.mean([direct_generate(mdp, pi, r, 80)[0] for r in roots])


def trained(beta, seed, fraction=1.0):
    k = max(1, int(round(fraction * len(roots))))
    subset = list(np.random.default_rng(seed).permutation(roots)[:k])
    cfg = TrainConfig(beta=beta, iterations=ITERATIONS, trees_per_iter=36,
                      target_rate=0.2, seed=seed)
    pi, _, _ = train(mdp, base, subset, cfg)
    return pi


print("== advantage coefficient sweep (direct generation success, %) ==")
with open(OUT / "beta_sweep.csv", "w") as fh:
    fh.write("beta," + ",".join(f"seed{s}" for s in SEEDS) + "\n")
    for beta in (0, 1, 2, 5, 10, 20):
        rates = [dg(trained(float(beta), seed)) for seed in SEEDS]
        fh.write(f"{beta}," + ",".join(f"{r:.1f}" for r in rates) + "\n")
        print(f"beta {beta:>4}: " + "  ".join(f"{r:5.1f}" for r in rates))

print("\n== model-call budget sweep (trained policy, seed 0) ==")
print("   DG is one greedy rollout capped at the smallest budget")
pi = trained(10.0, 0)
with open(OUT / "budget_sweep.csv", "w") as fh:
    fh.write("budget,success_rate\n")
    for budget in (0, 10, 50, 100):
        if budget == 0:
            rate = 100.0 * np.mean([direct_generate(mdp, pi, r, 10)[0] for r in roots])
        else:
            rate = 100.0 * np.mean([
                budgeted_search(mdp, pi, r, budget, np.random.SeedSequence((0, r)))[0]
                for r in roots
            ])
        fh.write(f"{budget},{rate:.1f}\n")
        print(f"budget {budget or 'DG':>4}: {rate:5.1f}%")

print("\n== training-data fraction sweep (mean over seeds, %) ==")
with open(OUT / "fraction_sweep.csv", "w") as fh:
    fh.write("fraction,mean_dg_success\n")
    for fraction in (0.02, 0.05, 0.1, 0.25, 1.0):
        mean_rate = np.mean([dg(trained(10.0, seed, fraction)) for seed in SEEDS])
        fh.write(f"{fraction},{mean_rate:.1f}\n")
        print(f"fraction {fraction:>5.2f}: {mean_rate:5.1f}%")

print(f"\nCSV written under {OUT}")
