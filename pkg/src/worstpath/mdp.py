"""Tree-structured MDP primitives.

A tree MDP couples a finite state space with a branching transition
function: applying an action to a state produces an ordered list of
child states, all of which must then be resolved in turn. Terminal
states are exactly the building blocks, and they are the only states
carrying reward 1. The state graph may share substates and contain
cycles; discounting and step caps handle those downstream, nothing
here assumes acyclicity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class InfeasibleActionError(ValueError):
    """An action index that is not feasible at the given state."""


class TerminalStateError(ValueError):
    """An expansion was requested on a building-block (terminal) state."""


class PathError(ValueError):
    """A path whose states and actions are inconsistent with the MDP."""


class TreeMdp:
    """Immutable finite MDP with branching transitions.

    Parameters
    ----------
    children:
        ``children[s][a]`` is the ordered, non-empty list of child states
        produced by applying action ``a`` at state ``s``. Duplicate
        children are allowed (a step may consume two equivalents of the
        same child). States with no actions are terminal.
    building_block:
        Per-state flags. Building blocks are terminal and are the only
        reward-1 states.
    gamma:
        Discount factor, strictly inside (0, 1).

    The constructor is deliberately lenient: structural invariants are
    reported by :meth:`validate` rather than raised, so that defective
    inputs can be inspected. Value operations assume a validating MDP.

    Internally all (state, action) pairs are enumerated state-major and
    their child lists concatenated into flat index arrays, which lets
    the value sweeps run as a handful of vectorised reductions.
    """

    def __init__(self, children, building_block, gamma: float):
        self.children = tuple(
            tuple(tuple(int(c) for c in act) for act in per_state)
            for per_state in children
        )
        self.building_block = np.array(building_block, dtype=bool)
        self.gamma = float(gamma)
        self.num_states = len(self.children)
        if self.building_block.shape != (self.num_states,):
            raise ValueError(
                f"building_block has {self.building_block.size} entries "
                f"for {self.num_states} states"
            )

        self.rewards = self.building_block.astype(np.float64)
        self.action_counts = np.array([len(a) for a in self.children], dtype=np.int64)

        # Flat pair layout: pair k is the k-th (state, action) in
        # state-major order. Child lists are concatenated alongside.
        self.state_pair_start = np.zeros(self.num_states + 1, dtype=np.int64)
        np.cumsum(self.action_counts, out=self.state_pair_start[1:])
        self.num_pairs = int(self.state_pair_start[-1])
        self.pair_state = np.repeat(np.arange(self.num_states), self.action_counts)

        flat, starts = [], [0]
        for per_state in self.children:
            for act in per_state:
                flat.extend(act)
                starts.append(len(flat))
        self.flat_children = np.array(flat, dtype=np.int64)
        self.pair_child_start = np.array(starts, dtype=np.int64)

        # States driven by a value sweep: non-terminal and non-building
        # block. On a validating MDP these are the same set.
        has_actions = self.action_counts > 0
        self.sweep_states = np.flatnonzero(has_actions & ~self.building_block)
        self.sweep_pair_start = self.state_pair_start[self.sweep_states]

    # -- primitive queries -------------------------------------------------

    def reward(self, s: int) -> int:
        """Binary reward: 1 iff ``s`` is a building block."""
        self._check_state(s)
        return int(self.building_block[s])

    def expand(self, s: int, a: int):
        """Return the stored child list for (s, a), unchanged and in order."""
        self._check_state(s)
        if self.building_block[s]:
            raise TerminalStateError(f"state {s} is a building block and cannot be expanded")
        if not 0 <= a < len(self.children[s]):
            raise InfeasibleActionError(f"action {a} is not feasible at state {s}")
        return list(self.children[s][a])

    def num_actions(self, s: int) -> int:
        self._check_state(s)
        return len(self.children[s])

    def pair_index(self, s: int, a: int) -> int:
        """Flat index of the (s, a) pair in the state-major enumeration."""
        self._check_state(s)
        if not 0 <= a < len(self.children[s]):
            raise InfeasibleActionError(f"action {a} is not feasible at state {s}")
        return int(self.state_pair_start[s]) + a

    def pair_slice(self, s: int) -> slice:
        self._check_state(s)
        return slice(int(self.state_pair_start[s]), int(self.state_pair_start[s + 1]))

    # -- validation --------------------------------------------------------

    def validate(self) -> list[str]:
        """Check every structural invariant, returning one message per violation.

        An empty list means the MDP is well formed. Violations are data,
        not exceptions, so defective instances can still be reported on.
        """
        problems = []
        if not 0.0 < self.gamma < 1.0:
            problems.append(f"gamma {self.gamma} outside (0, 1)")
        for s in range(self.num_states):
            n_a = len(self.children[s])
            if self.building_block[s] and n_a > 0:
                problems.append(f"state {s}: building block has {n_a} feasible actions")
            if not self.building_block[s] and n_a == 0:
                problems.append(f"state {s}: non-building-block state has no feasible actions")
            for a, act in enumerate(self.children[s]):
                if len(act) == 0:
                    problems.append(f"state {s} action {a}: empty child list")
                for c in act:
                    if not 0 <= c < self.num_states:
                        problems.append(f"state {s} action {a}: child {c} out of range")
        return problems

    # -- misc ----------------------------------------------------------------

    def _check_state(self, s: int) -> None:
        if not 0 <= s < self.num_states:
            raise IndexError(f"state {s} out of range for {self.num_states} states")

    def __eq__(self, other) -> bool:
        if not isinstance(other, TreeMdp):
            return NotImplemented
        return (
            self.children == other.children
            and bool(np.array_equal(self.building_block, other.building_block))
            and self.gamma == other.gamma
        )

    def __repr__(self) -> str:
        n_bb = int(self.building_block.sum())
        return (
            f"TreeMdp(num_states={self.num_states}, num_pairs={self.num_pairs}, "
            f"building_blocks={n_bb}, gamma={self.gamma})"
        )


@dataclass(frozen=True)
class Path:
    """A single root-to-leaf walk: states s_0..s_T and actions a_0..a_{T-1}."""

    states: tuple
    actions: tuple

    def __post_init__(self):
        object.__setattr__(self, "states", tuple(int(s) for s in self.states))
        object.__setattr__(self, "actions", tuple(int(a) for a in self.actions))

    def validate_against(self, mdp: TreeMdp) -> None:
        """Raise :class:`PathError` unless every step follows a stored transition."""
        if len(self.states) != len(self.actions) + 1:
            raise PathError(
                f"{len(self.states)} states need {len(self.states) - 1} actions, "
                f"got {len(self.actions)}"
            )
        if not self.states:
            raise PathError("empty path")
        for t, (s, a) in enumerate(zip(self.states[:-1], self.actions)):
            if not 0 <= s < mdp.num_states:
                raise PathError(f"step {t}: state {s} out of range")
            if mdp.building_block[s]:
                raise PathError(f"step {t}: state {s} is terminal but has an outgoing action")
            if not 0 <= a < len(mdp.children[s]):
                raise PathError(f"step {t}: action {a} not feasible at state {s}")
            if self.states[t + 1] not in mdp.children[s][a]:
                raise PathError(
                    f"step {t}: state {self.states[t + 1]} is not a child of ({s}, {a})"
                )
        last = self.states[-1]
        if not 0 <= last < mdp.num_states:
            raise PathError(f"final state {last} out of range")
