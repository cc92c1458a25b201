from remede.tree.base import (
    MAX_DEPTH,
    PathTables,
    TreeParams,
    build_path_tables,
    feature_ranges,
    init_split_params,
    n_internal,
    n_leaves,
    uniform_thresholds,
)
from remede.tree.dense import (
    SplitPlan,
    forward_dense,
    leaf_indicator,
    leaf_indicators,
    prepare_splits,
    split_bits,
    split_eval,
)
from remede.tree.export import export_graph, tree_from_json
from remede.tree.prune import PrunedNode, PrunedTree, as_pruned_tree, build_tree, prune, tree_size
from remede.tree.traversal import forward_traversal, goes_right, traverse_path

__all__ = [
    "MAX_DEPTH", "PathTables", "TreeParams", "build_path_tables", "feature_ranges",
    "init_split_params", "n_internal", "n_leaves", "uniform_thresholds", "SplitPlan", "forward_dense",
    "leaf_indicator", "leaf_indicators", "prepare_splits", "split_bits", "split_eval",
    "export_graph", "tree_from_json", "PrunedNode", "PrunedTree", "as_pruned_tree",
    "build_tree", "prune", "tree_size", "forward_traversal", "goes_right", "traverse_path",
]
