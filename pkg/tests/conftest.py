"""Shared fixtures.

The eight-state "figure tree" is the workhorse: states 0..7 stand for
A..H. Action 0 at the root decomposes A into {B, C}; the shortcut
action 1 decomposes A into {C} alone. B -> {D, E}, E -> {F, G},
G -> {H}; the building blocks are C, D, F, H. Expanding everything with
action 0 at the root realises a fully successful tree whose worst path
has four steps; stopping before G expands realises the failing variant.
"""

from pathlib import Path

import numpy as np
import pytest

from worstpath import TreeMdp, StochasticPolicy, load_env

FIXTURES = Path(__file__).parent / "fixtures"

A, B, C, D, E, F, G, H = range(8)


@pytest.fixture(scope="session")
def figure_env():
    return load_env(FIXTURES / "figure_tree.env")


@pytest.fixture()
def figure_mdp(figure_env):
    return figure_env[0]


@pytest.fixture()
def figure_base(figure_env):
    return figure_env[1]


@pytest.fixture()
def left_policy(figure_mdp):
    """Deterministic policy taking action 0 everywhere (the branching route)."""
    return StochasticPolicy.deterministic(figure_mdp, np.zeros(8, dtype=int))


@pytest.fixture()
def chain_mdp():
    """Five states: root 0 picks between a two-step route and a dead cycle.

    0 -a0-> [1], 0 -a1-> [3]; 1 -> [2]; 2 is the building block;
    3 and 4 feed each other forever.
    """
    children = [
        [[1], [3]],
        [[2]],
        [],
        [[4]],
        [[3]],
    ]
    return TreeMdp(children, [False, False, True, False, False], 0.95)


@pytest.fixture()
def chain_even_policy(chain_mdp):
    """50/50 at the root of chain_mdp, deterministic elsewhere."""
    probs = np.zeros(chain_mdp.num_pairs)
    probs[chain_mdp.pair_index(0, 0)] = 0.5
    probs[chain_mdp.pair_index(0, 1)] = 0.5
    probs[chain_mdp.pair_index(1, 0)] = 1.0
    probs[chain_mdp.pair_index(3, 0)] = 1.0
    probs[chain_mdp.pair_index(4, 0)] = 1.0
    return StochasticPolicy(chain_mdp, probs)


def one_step_mdp(gamma=0.95):
    """Root with a single action straight to a building block."""
    return TreeMdp([[[1]], []], [False, True], gamma)
