"""Build a small tree MDP by hand and walk through the value machinery.

States 0..7 play the roles A..H. The root A has two decompositions:
action 0 splits it into {B, C}, action 1 shortcuts straight to {C}.
B -> {D, E}, E -> {F, G}, G -> {H}; the building blocks are C, D, F, H.
"""

import numpy as np

from worstpath import (
    Path,
    StochasticPolicy,
    TreeMdp,
    estimated_depth,
    evaluate_policy,
    explore,
    greedy_policy,
    path_return,
    tree_worst_path_return,
    value_iteration,
)

A, B, C, D, E, F, G, H = range(8)
GAMMA = 0.95

mdp = TreeMdp(
    children=[
        [[B, C], [C]],  # A: branching route or shortcut
        [[D, E]],
        [],
        [],
        [[F, G]],
        [],
        [[H]],
        [],
    ],
    building_block=[False, False, True, True, False, True, False, True],
    gamma=GAMMA,
)
print(mdp)
print("violations:", mdp.validate())

# A single path is worth gamma^T if it ends on a building block.
deep = Path((A, B, E, G, H), (0, 0, 0, 0))
print(f"\nreturn of the four-step path: {path_return(deep, mdp):.6f}  (gamma^4 = {GAMMA**4:.6f})")

# A whole rollout tree is worth its weakest path. Expanding everything
# with action 0 at the root realises four paths of depths 1..4.
branching = StochasticPolicy.deterministic(mdp, np.zeros(8, dtype=int))
tree = explore(mdp, branching, A, max_steps=10, rng=np.random.default_rng(0))
print(f"full tree worst-path return: {tree_worst_path_return(tree, mdp):.6f}")

# Stopping early leaves G unexpanded, and one unresolved leaf zeroes the tree.
stub = explore(mdp, branching, A, max_steps=3, rng=np.random.default_rng(0))
print(f"truncated tree worst-path return: {tree_worst_path_return(stub, mdp):.6f}")

# Policy evaluation solves the recursion exactly; under the branching
# policy the root is worth gamma^4, the depth of its worst path.
v_pi = evaluate_policy(mdp, branching)
print(f"\nV under the branching policy at A: {v_pi[A]:.6f}")

# Value iteration finds the optimum: the shortcut caps the worst path at
# one step, so V*(A) = gamma.
v_star = value_iteration(mdp)
print(f"V* at A: {v_star[A]:.6f}  (gamma = {GAMMA})")
print("greedy action at A:", greedy_policy(mdp, v_star).argmax_action(A))

# Values translate back into route depths.
for s in (A, B, E, G):
    print(f"estimated depth of state {s}: {estimated_depth(float(v_star[s]), GAMMA):.1f}")
