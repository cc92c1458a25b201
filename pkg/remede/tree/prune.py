# remede/tree/prune.py
"""
Pruned, explicit form of a trained tree.

Pruning replays the recurrent model over a dataset, drops every subtree
that no timestep reached, collapses internal nodes left with a single
reachable child, and merges sibling leaves whose payloads are exactly
equal. Routing the pruning data through the result selects a leaf with
the same payload as the original tree at every timestep.
"""
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Protocol, Sequence, Set, Tuple

import numpy as np

from remede.tree.base import TreeParams, n_internal
from remede.tree.traversal import goes_right
from remede.utils import get_logger

logger = get_logger("remede.tree")


class LeafTracer(Protocol):
    def trace_leaves(self, inputs: np.ndarray) -> List[int]: ...


@dataclass
class PrunedNode:
    node_id: int
    feature: Optional[int] = None
    threshold: Optional[float] = None
    left: Optional["PrunedNode"] = None
    right: Optional["PrunedNode"] = None
    leaf: Optional[int] = None
    merged: List[int] = field(default_factory=list)
    payload: Dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def is_leaf(self) -> bool:
        return self.leaf is not None

    def walk(self) -> Iterable["PrunedNode"]:
        yield self
        if not self.is_leaf:
            yield from self.left.walk()
            yield from self.right.walk()


@dataclass
class PrunedTree:
    root: PrunedNode
    depth: int
    n_features: int
    n_x: Optional[int] = None
    class_values: Tuple[int, ...] = (-1, 0, 1)

    def route(self, x_aug) -> PrunedNode:
        x = np.asarray(getattr(x_aug, "data", x_aug), dtype=np.float64)
        if x.shape != (self.n_features,):
            raise ValueError(f"expected input of shape ({self.n_features},), got {x.shape}")
        node = self.root
        while not node.is_leaf:
            node = node.right if goes_right(x[node.feature], node.threshold) else node.left
        return node

    def __call__(self, x_aug) -> Tuple[int, Dict[str, np.ndarray]]:
        """Router interface: (leaf index, payload)."""
        node = self.route(x_aug)
        return node.leaf, {k: v.copy() for k, v in node.payload.items()}

    def leaves(self) -> List[PrunedNode]:
        return [n for n in self.root.walk() if n.is_leaf]


def _leaf_span(node: int, depth: int) -> range:
    level = int(np.floor(np.log2(node + 1)))
    offset = node - (2 ** level - 1)
    width = 2 ** (depth - level)
    return range(offset * width, (offset + 1) * width)


def _same_payload(a: PrunedNode, b: PrunedNode) -> bool:
    if a.payload.keys() != b.payload.keys():
        return False
    return all(np.array_equal(a.payload[k], b.payload[k]) for k in a.payload)


def build_tree(params: TreeParams, visited: Optional[Set[int]] = None, merge: bool = False,
               n_x: Optional[int] = None) -> PrunedTree:
    """
    Explicit tree from dense parameters. With `visited`, only subtrees that
    contain a visited leaf survive; with `merge`, equal sibling leaves fuse.
    """
    n_int = n_internal(params.depth)
    T, F = params.thresholds.data, params.feature_logits.data

    def grow(node: int) -> Optional[PrunedNode]:
        if node >= n_int:
            leaf = node - n_int
            if visited is not None and leaf not in visited:
                return None
            return PrunedNode(node_id=node, leaf=leaf, merged=[leaf], payload=params.leaf_payload(leaf))
        if visited is not None and not any(l in visited for l in _leaf_span(node, params.depth)):
            return None
        left, right = grow(2 * node + 1), grow(2 * node + 2)
        if left is None or right is None:
            # single reachable branch: the split never changes the outcome
            return left or right
        if merge and left.is_leaf and right.is_leaf and _same_payload(left, right):
            return PrunedNode(node_id=node, leaf=left.leaf, merged=left.merged + right.merged,
                              payload=left.payload)
        k = int(np.argmax(F[node]))
        return PrunedNode(node_id=node, feature=k, threshold=float(T[node, k]), left=left, right=right)

    root = grow(0)
    if root is None:
        raise ValueError("no leaf was visited; nothing to keep")
    return PrunedTree(root=root, depth=params.depth, n_features=params.n_features, n_x=n_x)


def as_pruned_tree(params: TreeParams, n_x: Optional[int] = None) -> PrunedTree:
    """The complete, unpruned tree in explicit form."""
    return build_tree(params, n_x=n_x)


def visited_leaves(model: LeafTracer, dataset: Sequence) -> Set[int]:
    seen: Set[int] = set()
    for seq in dataset:
        seen.update(model.trace_leaves(getattr(seq, "inputs", seq)))
    return seen


def prune(params: TreeParams, dataset: Sequence, model: LeafTracer) -> PrunedTree:
    if len(dataset) == 0:
        raise ValueError("cannot prune against an empty dataset")
    seen = visited_leaves(model, dataset)
    pruned = build_tree(params, visited=seen, merge=True, n_x=getattr(model, "n_x", None))
    logger.info(
        "pruned depth-%d tree: %d of %d leaves visited, %d nodes kept of %d",
        params.depth, len(seen), 2 ** params.depth, tree_size(pruned), params.n_nodes,
    )
    return pruned


def tree_size(pruned: PrunedTree) -> int:
    """Internal plus leaf nodes."""
    return sum(1 for _ in pruned.root.walk())
