"""Realised rollout trees.

A :class:`SynTree` is one concrete decomposition of a root state: every
internal node records the action that expanded it, leaves are building
blocks or states left unexpanded (step cap, or a child repeating one of
its ancestors). :class:`Branch` is the replay unit extracted from trees.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum


class NodeStatus(Enum):
    EXPANDED = "expanded"
    BUILDING_BLOCK = "building_block"
    UNEXPANDED = "unexpanded"


@dataclass
class TreeNode:
    state: int
    parent: int | None
    depth: int
    status: NodeStatus = NodeStatus.UNEXPANDED
    action: int | None = None
    children: list = field(default_factory=list)

    @property
    def is_leaf(self) -> bool:
        return not self.children


@dataclass(frozen=True)
class Branch:
    """One expansion record: a state, the action applied, its child states."""

    state: int
    action: int
    children: tuple

    def __post_init__(self):
        object.__setattr__(self, "children", tuple(int(c) for c in self.children))


class SynTree:
    """Rollout tree with nodes stored in creation (breadth-first) order."""

    def __init__(self, root_state: int, root_is_building_block: bool):
        status = NodeStatus.BUILDING_BLOCK if root_is_building_block else NodeStatus.UNEXPANDED
        self.nodes = [TreeNode(state=int(root_state), parent=None, depth=0, status=status)]
        self.root = 0

    def attach(self, parent: int, state: int, is_building_block: bool) -> int:
        """Add a child node under ``parent`` and return its index."""
        status = NodeStatus.BUILDING_BLOCK if is_building_block else NodeStatus.UNEXPANDED
        node = TreeNode(
            state=int(state),
            parent=parent,
            depth=self.nodes[parent].depth + 1,
            status=status,
        )
        self.nodes.append(node)
        idx = len(self.nodes) - 1
        self.nodes[parent].children.append(idx)
        return idx

    def mark_expanded(self, idx: int, action: int) -> None:
        self.nodes[idx].status = NodeStatus.EXPANDED
        self.nodes[idx].action = int(action)

    def ancestor_states(self, idx: int) -> set:
        """States on the path from the root to ``idx``, inclusive."""
        out = set()
        cur = idx
        while cur is not None:
            out.add(self.nodes[cur].state)
            cur = self.nodes[cur].parent
        return out

    def leaf_indices(self):
        return [i for i, n in enumerate(self.nodes) if n.is_leaf]

    def subtree_indices(self, idx: int):
        """Node indices of the subtree rooted at ``idx``, breadth-first."""
        out = [idx]
        cursor = 0
        while cursor < len(out):
            out.extend(self.nodes[out[cursor]].children)
            cursor += 1
        return out

    def num_expanded(self) -> int:
        return sum(1 for n in self.nodes if n.status is NodeStatus.EXPANDED)

    def has_unexpanded(self) -> bool:
        return any(n.status is NodeStatus.UNEXPANDED for n in self.nodes)

    def max_depth(self) -> int:
        return max(n.depth for n in self.nodes)

    def __len__(self) -> int:
        return len(self.nodes)

    def __repr__(self) -> str:
        return (
            f"SynTree(nodes={len(self.nodes)}, expanded={self.num_expanded()}, "
            f"root_state={self.nodes[self.root].state})"
        )
