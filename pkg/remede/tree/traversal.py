# remede/tree/traversal.py
from typing import Dict, List, Tuple

import numpy as np

from remede.autodiff.ops import round_half_away, sigmoid_np
from remede.tree.base import TreeParams, n_internal


def goes_right(x_value: float, threshold: float) -> bool:
    """Same hard rule as the dense form: round(sigmoid(x - tau)) == 1."""
    z = np.float64(x_value) - np.float64(threshold)
    return bool(round_half_away(sigmoid_np(z)) == 1.0)


def traverse_path(x_aug, params: TreeParams) -> Tuple[int, List[int]]:
    """Root-to-leaf walk; returns (leaf index, visited internal nodes)."""
    x = np.asarray(getattr(x_aug, "data", x_aug), dtype=np.float64)
    if x.shape != (params.n_features,):
        raise ValueError(f"expected input of shape ({params.n_features},), got {x.shape}")
    T = params.thresholds.data
    F = params.feature_logits.data
    node, visited = 0, []
    n_int = n_internal(params.depth)
    while node < n_int:
        visited.append(node)
        k = int(np.argmax(F[node]))
        node = 2 * node + (2 if goes_right(x[k], T[node, k]) else 1)
    return node - n_int, visited


def forward_traversal(x_aug, params: TreeParams) -> Tuple[int, Dict[str, np.ndarray]]:
    leaf, _ = traverse_path(x_aug, params)
    return leaf, params.leaf_payload(leaf)
