import json

import numpy as np
import pytest
from numpy.testing import assert_array_equal

from remede.autodiff import constant, parameter, soft_mode
from remede.cell import RemedeCell
from remede.tree import (
    TreeParams,
    as_pruned_tree,
    build_path_tables,
    export_graph,
    forward_dense,
    forward_traversal,
    leaf_indicator,
    leaf_indicators,
    prune,
    split_eval,
    tree_from_json,
    tree_size,
    traverse_path,
)


def _tree(depth, n_features, rng, n_out=2):
    thresholds = parameter(rng.uniform(-1, 1, size=(2 ** depth - 1, n_features)))
    logits = parameter(rng.normal(size=(2 ** depth - 1, n_features)))
    leaves = {"out": parameter(rng.normal(size=(2 ** depth, n_out)))}
    return TreeParams(depth=depth, thresholds=thresholds, feature_logits=logits, leaves=leaves)


def test_path_tables_depth_two():
    paths = build_path_tables(2)
    assert_array_equal(paths.node_index, [[0, 1], [0, 1], [0, 2], [0, 2]])
    assert_array_equal(paths.direction, [[0, 0], [0, 1], [1, 0], [1, 1]])


@pytest.mark.parametrize("depth", [0, 13])
def test_depth_out_of_range(depth):
    with pytest.raises(ValueError):
        build_path_tables(depth)


def test_split_eval_uses_argmax_feature():
    params = TreeParams(
        depth=1,
        thresholds=parameter([[0.5, -3.0]]),
        feature_logits=parameter([[2.0, 0.0]]),
        leaves={"out": parameter([[0.0], [1.0]])},
    )
    assert split_eval(constant([0.7, -10.0]), 0, params).item() == 1.0
    assert split_eval(constant([0.2, 10.0]), 0, params).item() == 0.0
    # exactly at the threshold goes right
    assert split_eval(constant([0.5, 0.0]), 0, params).item() == 1.0


def test_partition_of_unity(rng):
    params = _tree(4, 3, rng)
    paths = build_path_tables(4)
    x = constant(rng.normal(size=(500, 3)))
    ind = leaf_indicators(x, params, paths).data
    assert set(np.unique(ind)) <= {0.0, 1.0}
    assert_array_equal(ind.sum(axis=1), np.ones(500))


def test_soft_indicators_still_sum_to_one(rng):
    params = _tree(3, 2, rng)
    paths = build_path_tables(3)
    with soft_mode():
        ind = leaf_indicators(constant(rng.normal(size=(50, 2))), params, paths).data
    assert np.all((ind >= 0) & (ind <= 1))
    np.testing.assert_allclose(ind.sum(axis=1), 1.0)


def test_leaf_indicator_single_input(rng):
    params = _tree(2, 2, rng)
    paths = build_path_tables(2)
    x = constant([0.1, -0.3])
    leaf, _ = traverse_path(x.data, params)
    assert leaf_indicator(x, leaf, params, paths).item() == 1.0
    with pytest.raises(ValueError):
        leaf_indicator(x, 4, params, paths)


def test_dense_matches_traversal_exactly(rng):
    params = _tree(6, 4, rng, n_out=3)
    paths = build_path_tables(6)
    xs = rng.uniform(-1.5, 1.5, size=(10_000, 4))
    dense = forward_dense(constant(xs), params, paths)["out"].data
    ind = leaf_indicators(constant(xs), params, paths).data
    for i in range(xs.shape[0]):
        leaf, payload = forward_traversal(xs[i], params)
        assert ind[i].argmax() == leaf
        assert_array_equal(dense[i], payload["out"])


def test_traversal_visits_depth_nodes(rng):
    params = _tree(3, 2, rng)
    leaf, visited = traverse_path(np.array([0.0, 0.0]), params)
    assert len(visited) == 3 and visited[0] == 0
    assert 0 <= leaf < 8


def test_tree_size_unpruned(rng):
    assert tree_size(as_pruned_tree(_tree(2, 2, rng))) == 7
    assert tree_size(as_pruned_tree(_tree(6, 2, rng))) == 2 ** 7 - 1


class _FixedTracer:
    def __init__(self, leaves):
        self.leaves = leaves

    def trace_leaves(self, inputs):
        return self.leaves


def test_prune_drops_unvisited_right_subtree(rng):
    params = _tree(2, 2, rng)
    pruned = prune(params, [np.zeros((1, 2))], _FixedTracer([0, 1]))
    # root collapses onto its left child, which keeps both leaves
    assert tree_size(pruned) == 3
    assert sorted(n.leaf for n in pruned.leaves()) == [0, 1]


def test_prune_single_leaf_is_one_node(rng):
    params = _tree(3, 2, rng)
    assert tree_size(prune(params, [np.zeros((1, 2))], _FixedTracer([5]))) == 1


def test_prune_merges_identical_siblings(rng):
    params = _tree(1, 2, rng)
    params.leaves["out"].data[1] = params.leaves["out"].data[0]
    pruned = prune(params, [np.zeros((1, 2))], _FixedTracer([0, 1]))
    assert tree_size(pruned) == 1
    assert pruned.root.merged == [0, 1]


def test_prune_rejects_empty_dataset(rng):
    with pytest.raises(ValueError):
        prune(_tree(2, 2, rng), [], _FixedTracer([0]))


def test_pruning_is_sound_on_the_pruning_data(rng, poc1_data):
    cell = RemedeCell.init(rng, n_x=1, n_m=2, n_classes=3, depth=4,
                           warmup=np.concatenate([s.inputs for s in poc1_data[:20]]))
    data = poc1_data[:60]
    pruned = prune(cell.tree, data, cell)
    assert tree_size(pruned) <= cell.tree.n_nodes
    for seq in data:
        full = cell.infer(seq.inputs)
        small = cell.infer(seq.inputs, router=pruned)
        assert_array_equal(full.logits, small.logits)
        assert_array_equal(full.states, small.states)


def test_export_dot_labels_memory_feature():
    params = TreeParams(
        depth=1,
        thresholds=parameter([[0.0, 0.25]]),
        feature_logits=parameter([[0.0, 1.0]]),
        leaves={
            "class_logits": parameter([[1.0, 0.0, 0.0], [0.0, 0.0, 1.0]]),
            "gate_logits": parameter([[5.0], [-5.0]]),
            "input_weights": parameter([[[0.5]], [[-0.5]]]),
        },
    )
    dot = export_graph(as_pruned_tree(params, n_x=1), "dot")
    assert dot.startswith("digraph Tree {")
    assert "m_0 ≥ 0.25" in dot
    assert "class = -1" in dot and "class = 1" in dot
    assert "gate = 1" in dot and "gate = 0" in dot


def test_export_json_round_trip(rng):
    pruned = as_pruned_tree(_tree(3, 2, rng), n_x=1)
    text = export_graph(pruned, "json")
    again = tree_from_json(text)
    assert tree_size(again) == tree_size(pruned)
    assert json.loads(export_graph(again, "json")) == json.loads(text)
    x = np.array([0.3, -0.4])
    assert again.route(x).leaf == pruned.route(x).leaf


def test_export_unknown_format(rng):
    with pytest.raises(ValueError):
        export_graph(as_pruned_tree(_tree(1, 1, rng)), "png")
