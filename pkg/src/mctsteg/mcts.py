"""Trigeminal Monte Carlo tree search over polarity assignments.

A node at depth d fixes the polarity of the d-th element in the current
sublattice's adjustment order; the three child slots always map lc -> -1,
mc -> 0, rc -> +1. A leaf at depth == sublattice size encodes one complete
polarity matrix. Selection is UCT over fully expanded nodes, expansion and
rollout are uniform over untried actions, and rewards are added along the
leaf-to-root path.

Visit accounting: search() increments the root, best_child() increments
the chosen child, and nodes are created with one visit. Every search
descends to a leaf, so an internal node's visits equal the sum of its
children's visits exactly; backpropagation updates every node on the path
except the root, so an internal node's reward equals the sum of its
children's rewards.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, StegError

ACTIONS = (-1, 0, 1)
_SLOTS = {-1: "lc", 0: "mc", 1: "rc"}
_ENUMERATION_LIMIT = 6561  # 3**8


@dataclass
class Budget:
    """Search budget and reward shaping knobs."""

    max_searches: int = 128
    confidence_threshold: float = 0.98
    exploration_c: float = math.sqrt(2.0)
    alpha: float = 1.5
    reward_scale_pos: float = 10.0
    reward_scale_neg: float = 1.0

    def __post_init__(self) -> None:
        if self.max_searches < 1:
            raise ValueError("max_searches must be at least 1")
        if not 0.0 < self.confidence_threshold <= 1.0:
            raise ValueError("confidence_threshold must lie in (0, 1]")
        if self.alpha <= 1.0:
            raise ValueError("alpha must exceed 1 (it divides costs)")
        if self.exploration_c < 0.0:
            raise ValueError("exploration_c must be nonnegative")


@dataclass
class PolarityMatrix:
    """Ternary polarity values aligned to an adjustment order."""

    values: np.ndarray
    depth_assigned: int

    def __post_init__(self) -> None:
        arr = np.asarray(self.values)
        if arr.ndim != 1:
            raise DomainError("polarity values must be a flat sequence")
        if not np.isin(arr, (-1, 0, 1)).all():
            raise DomainError("polarity values must be ternary")
        if not 0 <= self.depth_assigned <= arr.size:
            raise DomainError("depth_assigned out of range")
        self.values = arr.astype(np.int8)

    @property
    def size(self) -> int:
        return self.values.size


class SearchNode:
    """One tree node; slots keep per-search memory at O(depth)."""

    __slots__ = ("n", "r", "p", "lc", "mc", "rc", "d", "action")

    def __init__(self, parent=None, action=None):
        self.n = 1
        self.r = 0.0
        self.p = parent
        self.lc = None
        self.mc = None
        self.rc = None
        self.d = 0 if parent is None else parent.d + 1
        self.action = action

    def child(self, action: int) -> "SearchNode | None":
        return getattr(self, _SLOTS[action])

    def attach(self, action: int) -> "SearchNode":
        if self.child(action) is not None:
            raise StegError(f"child for action {action} already exists")
        node = SearchNode(self, action)
        setattr(self, _SLOTS[action], node)
        return node

    def children(self):
        return [c for c in (self.lc, self.mc, self.rc) if c is not None]

    def untried_actions(self) -> list[int]:
        return [a for a in ACTIONS if self.child(a) is None]

    @property
    def fully_expanded(self) -> bool:
        return self.lc is not None and self.mc is not None and self.rc is not None


def new_root() -> SearchNode:
    root = SearchNode()
    root.n = 0
    return root


def uct_score(node: SearchNode, exploration_c: float) -> float:
    """Mean reward plus the exploration bonus C*sqrt(ln N(parent)/N(node))."""
    if node.p is None:
        raise StegError("the root has no UCT score")
    if node.n < 1 or node.p.n < 1:
        raise StegError("UCT is undefined for unvisited nodes")
    exploit = node.r / node.n
    explore = exploration_c * math.sqrt(math.log(node.p.n) / node.n)
    return exploit + explore


def best_child(node: SearchNode, exploration_c: float) -> SearchNode:
    """Highest-UCT child; ties resolve in action order -1, 0, +1.

    The chosen child's visit count is incremented, which is the selection
    half of the visit accounting.
    """
    if not node.fully_expanded:
        raise StegError("best_child requires a fully expanded node")
    best = None
    best_score = -math.inf
    for action in ACTIONS:
        c = node.child(action)
        score = uct_score(c, exploration_c)
        if score > best_score:
            best, best_score = c, score
    best.n += 1
    return best


def random_search(node: SearchNode, size: int, gen: np.random.Generator) -> SearchNode:
    """Roll out to a leaf, creating one node per level via uniform
    untried-action choices."""
    while node.d < size:
        untried = node.untried_actions()
        if not untried:
            raise StegError("random_search reached a fully expanded node")
        action = untried[int(gen.integers(len(untried)))]
        node = node.attach(action)
    return node


def search(
    root: SearchNode,
    size: int,
    gen: np.random.Generator,
    exploration_c: float = math.sqrt(2.0),
) -> SearchNode:
    """One selection+expansion pass: UCT through the fully expanded
    region, then a random rollout to depth == size."""
    root.n += 1
    node = root
    while node.d < size and node.fully_expanded:
        node = best_child(node, exploration_c)
    if node.d < size:
        node = random_search(node, size, gen)
    return node


def backpropagate(leaf: SearchNode, scaled_reward: float) -> None:
    """Add the scaled reward to every node from leaf up to, but not
    including, the root."""
    node = leaf
    while node.p is not None:
        node.r += scaled_reward
        node = node.p


def gamma_of(leaf: SearchNode, size: int) -> PolarityMatrix:
    """Decode the complete polarity matrix a leaf represents."""
    if leaf.d != size:
        raise StegError(
            f"leaf depth {leaf.d} does not cover the sublattice (size {size})"
        )
    values = np.zeros(size, dtype=np.int8)
    node = leaf
    while node.p is not None:
        values[node.d - 1] = node.action
        node = node.p
    return PolarityMatrix(values, size)


def enumerate_terminals(size: int) -> list[PolarityMatrix]:
    """All 3**size complete polarity matrices, each exactly once."""
    if 3**size > _ENUMERATION_LIMIT:
        raise StegError(
            f"enumeration of 3**{size} terminal states exceeds the "
            f"{_ENUMERATION_LIMIT} limit"
        )
    out = []
    for combo in itertools.product(ACTIONS, repeat=size):
        out.append(PolarityMatrix(np.array(combo, dtype=np.int8), size))
    return out


def count_nodes(root: SearchNode) -> int:
    total = 0
    stack = [root]
    while stack:
        node = stack.pop()
        total += 1
        stack.extend(node.children())
    return total
