# remede/tree/base.py
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from remede.autodiff import Tensor, parameter

MAX_DEPTH = 12


def n_internal(depth: int) -> int:
    return 2 ** depth - 1


def n_leaves(depth: int) -> int:
    return 2 ** depth


def check_depth(depth: int) -> int:
    if not isinstance(depth, (int, np.integer)) or not 1 <= depth <= MAX_DEPTH:
        raise ValueError(f"tree depth must be an integer in [1, {MAX_DEPTH}], got {depth!r}")
    return int(depth)


@dataclass(frozen=True)
class PathTables:
    """
    node_index[l, j]: breadth-first index of the internal node at depth j on the path to leaf l.
    direction[l, j]: 0 = left, 1 = right (split condition true).
    """
    depth: int
    node_index: np.ndarray
    direction: np.ndarray


def build_path_tables(depth: int) -> PathTables:
    depth = check_depth(depth)
    leaves = np.arange(n_leaves(depth))
    # 경로 비트 = 리프 번호의 이진 표현 (MSB 먼저)
    shifts = np.arange(depth - 1, -1, -1)
    direction = (leaves[:, None] >> shifts[None, :]) & 1
    node_index = np.zeros_like(direction)
    k = np.zeros(len(leaves), dtype=np.int64)
    for j in range(depth):
        node_index[:, j] = k
        k = 2 * k + 1 + direction[:, j]
    node_index.setflags(write=False)
    direction.setflags(write=False)
    return PathTables(depth=depth, node_index=node_index, direction=direction)


@dataclass
class TreeParams:
    """
    Learnable parameters of one fully-grown tree.
    thresholds / feature_logits: [(2^d - 1), n]; leaves: payload fields, each with leading axis 2^d.
    """
    depth: int
    thresholds: Tensor
    feature_logits: Tensor
    leaves: Dict[str, Tensor] = field(default_factory=dict)

    def __post_init__(self):
        check_depth(self.depth)
        expected = (n_internal(self.depth), self.n_features)
        if self.thresholds.shape != expected or self.feature_logits.shape != expected:
            raise ValueError(
                f"split parameters must have shape {expected}, got "
                f"{self.thresholds.shape} and {self.feature_logits.shape}"
            )
        for name, t in self.leaves.items():
            if t.shape[0] != n_leaves(self.depth):
                raise ValueError(f"leaf field {name!r} needs {n_leaves(self.depth)} rows, got {t.shape}")

    @property
    def n_features(self) -> int:
        return self.thresholds.shape[1]

    @property
    def n_nodes(self) -> int:
        return n_internal(self.depth) + n_leaves(self.depth)

    def parameters(self) -> List[Tensor]:
        return [self.thresholds, self.feature_logits, *self.leaves.values()]

    def named_parameters(self) -> Dict[str, Tensor]:
        out = {"thresholds": self.thresholds, "feature_logits": self.feature_logits}
        out.update({f"leaves.{k}": v for k, v in self.leaves.items()})
        return out

    def split_feature(self, node: int) -> int:
        return int(np.argmax(self.feature_logits.data[node]))

    def leaf_payload(self, leaf: int) -> Dict[str, np.ndarray]:
        return {k: v.data[leaf].copy() for k, v in self.leaves.items()}

    def snapshot(self) -> Dict[str, np.ndarray]:
        return {k: v.data.copy() for k, v in self.named_parameters().items()}

    def restore(self, snap: Dict[str, np.ndarray]) -> None:
        for k, v in self.named_parameters().items():
            v.data[...] = snap[k]


def init_split_params(rng: np.random.Generator, depth: int, low: np.ndarray,
                      high: np.ndarray) -> Tuple[Tensor, Tensor]:
    """Thresholds uniform in [low_k, high_k] per feature; feature logits ~ N(0, 1)."""
    depth = check_depth(depth)
    thresholds = uniform_thresholds(rng, depth, low, high)
    logits = rng.normal(0.0, 1.0, size=(n_internal(depth), thresholds.shape[1]))
    return parameter(thresholds, name="thresholds"), parameter(logits, name="feature_logits")


def uniform_thresholds(rng: np.random.Generator, depth: int, low: np.ndarray, high: np.ndarray) -> np.ndarray:
    low = np.asarray(low, dtype=np.float64)
    high = np.asarray(high, dtype=np.float64)
    if low.shape != high.shape or low.ndim != 1:
        raise ValueError("feature ranges must be two 1-D arrays of equal length")
    # 상수 피처는 구간을 약간 넓힌다
    high = np.where(high <= low, low + 1e-3, high)
    return rng.uniform(low, high, size=(n_internal(depth), low.size))


def feature_ranges(warmup: Optional[np.ndarray], n_x: int, n_m: int,
                   memory: Optional[np.ndarray] = None) -> Tuple[np.ndarray, np.ndarray]:
    """
    Empirical per-feature range over a warm-up batch. Memory features use the
    range of the given hidden states, or [-1, 1] when none are given.
    """
    if warmup is None or np.asarray(warmup).size == 0:
        low_x, high_x = -np.ones(n_x), np.ones(n_x)
    else:
        flat = np.asarray(warmup, dtype=np.float64).reshape(-1, n_x)
        low_x, high_x = flat.min(axis=0), flat.max(axis=0)
    if memory is None or np.asarray(memory).size == 0:
        low_m, high_m = -np.ones(n_m), np.ones(n_m)
    else:
        states = np.asarray(memory, dtype=np.float64).reshape(-1, n_m)
        low_m, high_m = states.min(axis=0), states.max(axis=0)
    return np.concatenate([low_x, low_m]), np.concatenate([high_x, high_m])
