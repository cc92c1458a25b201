# remede/tree/dense.py
"""
Dense (arithmetic) form of a fully-grown tree.

Every split is round_st(sigmoid(iota . x - iota . tau)) with iota the
hardmax of the node's feature logits; a leaf indicator is the product of
the split bits (or their complements) along the leaf's path, and the tree
output is the indicator-weighted sum of the leaf payloads. Direction 1
(right) pairs with the split bit S, direction 0 (left) with 1 - S, so an
input exactly at a threshold (sigmoid(0) = 0.5 rounds to 1) goes right.
"""
from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np

from remede.autodiff import (
    Tensor,
    add,
    constant,
    dot,
    expand_rows,
    hardmax_st,
    index,
    matmul,
    mul,
    prod_last,
    reduce_sum,
    reshape,
    round_st,
    sigmoid,
    sub,
    transpose,
)
from remede.errors import ShapeError
from remede.tree.base import PathTables, TreeParams


@dataclass
class SplitPlan:
    """Per-node selectors, computed once and reused across timesteps."""
    iota_t: Tensor  # [n, N]
    tau: Tensor     # [N]


def prepare_splits(params: TreeParams) -> SplitPlan:
    iota = hardmax_st(params.feature_logits)
    tau = reduce_sum(mul(iota, params.thresholds), axis=1)
    return SplitPlan(iota_t=transpose(iota), tau=tau)


def _as_batch(x_aug: Tensor, params: TreeParams) -> Tensor:
    if x_aug.shape[-1] != params.n_features:
        raise ShapeError(f"input has {x_aug.shape[-1]} features, tree expects {params.n_features}")
    if x_aug.ndim == 1:
        return reshape(x_aug, (1, x_aug.shape[0]))
    if x_aug.ndim != 2:
        raise ShapeError(f"input must be [n] or [B, n], got {x_aug.shape}")
    return x_aug


def split_eval(x_aug: Tensor, node: int, params: TreeParams) -> Tensor:
    """Hard split bit of one internal node for a single augmented input."""
    if x_aug.ndim != 1 or x_aug.shape[0] != params.n_features:
        raise ShapeError(f"split_eval expects x of shape ({params.n_features},), got {x_aug.shape}")
    iota = hardmax_st(index(params.feature_logits, node))
    z = sub(dot(iota, x_aug), dot(iota, index(params.thresholds, node)))
    return round_st(sigmoid(z))


def split_bits(x_batch: Tensor, params: TreeParams, plan: Optional[SplitPlan] = None) -> Tensor:
    """Split bits of all internal nodes, [B, 2^d - 1]."""
    plan = plan or prepare_splits(params)
    proj = matmul(x_batch, plan.iota_t)
    z = sub(proj, expand_rows(plan.tau, x_batch.shape[0]))
    return round_st(sigmoid(z))


def leaf_indicators(x_aug: Tensor, params: TreeParams, paths: PathTables,
                    plan: Optional[SplitPlan] = None) -> Tensor:
    """Indicator of every leaf, [B, 2^d] (or [2^d] for a single input)."""
    single = x_aug.ndim == 1
    xb = _as_batch(x_aug, params)
    s = split_bits(xb, params, plan)
    B = xb.shape[0]
    gathered = index(s, (slice(None), paths.node_index))  # [B, 2^d, d]
    p = paths.direction.astype(np.float64)
    # 방향 1 -> S, 방향 0 -> 1 - S
    coef = constant(np.broadcast_to(2.0 * p - 1.0, (B,) + p.shape).copy())
    offset = constant(np.broadcast_to(1.0 - p, (B,) + p.shape).copy())
    ind = prod_last(add(mul(gathered, coef), offset))
    return reshape(ind, (ind.shape[1],)) if single else ind


def leaf_indicator(x_aug: Tensor, l: int, params: TreeParams, paths: PathTables) -> Tensor:
    if not 0 <= l < paths.node_index.shape[0]:
        raise ValueError(f"leaf index {l} out of range for depth {params.depth}")
    return index(leaf_indicators(x_aug, params, paths), l)


def mix_payloads(ind: Tensor, params: TreeParams) -> Dict[str, Tensor]:
    """Sum_l ind[:, l] * payload_l for every payload field."""
    B, n_leaf = ind.shape
    out = {}
    for name, table in params.leaves.items():
        row_shape = table.shape[1:]
        flat = reshape(table, (n_leaf, int(np.prod(row_shape, dtype=np.int64))))
        out[name] = reshape(matmul(ind, flat), (B,) + row_shape)
    return out


def forward_dense(x_aug: Tensor, params: TreeParams, paths: PathTables,
                  plan: Optional[SplitPlan] = None) -> Dict[str, Tensor]:
    """Indicator-weighted payload sum; with hard indicators this is the selected leaf's payload."""
    single = x_aug.ndim == 1
    xb = _as_batch(x_aug, params)
    ind = leaf_indicators(xb, params, paths, plan)
    mixed = mix_payloads(ind, params)
    if single:
        return {k: reshape(v, v.shape[1:]) for k, v in mixed.items()}
    return mixed
