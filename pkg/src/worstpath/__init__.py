"""Worst-path optimisation in tree-structured MDPs.

A tree MDP decomposes a state into several children per action; a
rollout therefore realises a tree, and the tree is only worth its
weakest root-to-leaf path. This package provides the exact value
machinery for that objective (policy evaluation, optimality backups,
value iteration), a reproducible synthetic environment generator, a
self-imitation training loop that reweights replayed decisions by their
exponentiated advantage, brute-force oracles for small instances, and a
benchmark harness with a small CLI.
"""

from .envgen import (
    EnvConfig,
    EnvValidationError,
    GenerationError,
    ParseError,
    deserialize,
    generate,
    load_env,
    save_env,
    serialize,
    solvable_states,
)
from .harness import (
    EvalConfig,
    EvalReport,
    EvalRow,
    NotSolvedError,
    budgeted_search,
    depth_correlation,
    direct_generate,
    evaluate_targets,
    mean_route_length,
    read_report,
    route_length,
    run_experiment,
    success_rate,
    write_report,
)
from .mdp import (
    InfeasibleActionError,
    Path,
    PathError,
    TerminalStateError,
    TreeMdp,
)
from .oracle import (
    ImprovementReport,
    SizeGuardError,
    brute_force_v_star,
    check_improvement,
    count_deterministic_policies,
    iter_deterministic_policies,
    monte_carlo_objective,
)
from .training import (
    DegeneratePolicyError,
    EmptyBufferError,
    IterationMetrics,
    ReplayBuffer,
    SupportViolationError,
    TabularValueLearner,
    TrainConfig,
    explore,
    extract_successful_branches,
    imitation_weights,
    is_successful,
    policy_update_exact,
    policy_update_sampled,
    train,
    value_update,
)
from .trees import Branch, NodeStatus, SynTree, TreeNode
from .values import (
    ConvergenceError,
    StochasticPolicy,
    UndefinedDepthError,
    advantage,
    all_advantages,
    bellman_optimal_backup,
    discount_power,
    estimated_depth,
    evaluate_policy,
    greedy_policy,
    iteration_cap,
    load_values_csv,
    path_return,
    q_value,
    save_values_csv,
    tree_worst_path_return,
    value_iteration,
)

__version__ = "0.1.0"
