# remede/cell.py
"""
Recurrent memory decision tree cell.

The tree reads the augmented input (x_t, m_{t-1}); the selected leaf j
prescribes the class logits z_j and the memory update

    m_t = m_{t-1} + round(sigmoid(c_j)) * tanh(W_j x_t)

with m_0 = 0. All timesteps of a sequence are recorded on one tape, so the
backward pass runs through time.
"""
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from remede.autodiff import (
    Tensor,
    add,
    batched_matvec,
    concat,
    constant,
    cross_entropy,
    mean,
    mul,
    no_tape,
    parameter,
    reshape,
    round_st,
    sigmoid,
    stack,
    tanh_act,
)
from remede.autodiff.ops import round_half_away, sigmoid_np
from remede.errors import DatasetFormatError, ShapeError
from remede.schemas import Checkpoint, LeafPayloadRecord
from remede.tree.base import (
    PathTables,
    TreeParams,
    build_path_tables,
    feature_ranges,
    init_split_params,
    n_leaves,
    uniform_thresholds,
)
from remede.tree.dense import SplitPlan, forward_dense, prepare_splits
from remede.tree.traversal import forward_traversal

Router = Callable[[np.ndarray], Tuple[int, Dict[str, np.ndarray]]]


@dataclass
class HiddenState:
    m: Tensor

    @classmethod
    def zeros(cls, n_m: int, batch: Optional[int] = None) -> "HiddenState":
        shape = (n_m,) if batch is None else (batch, n_m)
        return cls(constant(np.zeros(shape)))


@dataclass
class InferenceTrace:
    logits: np.ndarray  # [L, n_classes]
    states: np.ndarray  # [L + 1, n_m], states[0] = 0
    leaves: np.ndarray  # [L]

    @property
    def predictions(self) -> np.ndarray:
        return np.argmax(self.logits, axis=-1)


@dataclass
class RemedeCell:
    tree: TreeParams
    n_x: int
    n_m: int
    n_classes: int
    paths: PathTables = field(init=False, repr=False)

    def __post_init__(self):
        if self.tree.n_features != self.n_x + self.n_m:
            raise ShapeError(
                f"tree reads {self.tree.n_features} features but n_x + n_m = {self.n_x + self.n_m}"
            )
        expected = {
            "class_logits": (self.n_classes,),
            "gate_logits": (self.n_m,),
            "input_weights": (self.n_m, self.n_x),
        }
        for name, shape in expected.items():
            t = self.tree.leaves.get(name)
            if t is None or t.shape[1:] != shape:
                raise ShapeError(f"leaf field {name!r} must have row shape {shape}")
        self.paths = build_path_tables(self.tree.depth)

    # ------------------------------------------------------------ creation

    @classmethod
    def init(cls, rng: np.random.Generator, n_x: int, n_m: int = 5, n_classes: int = 3,
             depth: int = 6, warmup: Optional[np.ndarray] = None) -> "RemedeCell":
        """
        Random initialisation. Input thresholds follow the warm-up batch range.
        When the warm-up holds whole sequences [B, L, n_x], memory thresholds
        are redrawn over the hidden states the untrained cell reaches on them,
        so every memory split starts inside the data it routes.
        """
        low, high = feature_ranges(warmup, n_x, n_m)
        thresholds, logits = init_split_params(rng, depth, low, high)
        n_leaf = n_leaves(depth)
        leaves = {
            "class_logits": parameter(rng.normal(0.0, 0.1, size=(n_leaf, n_classes)), "class_logits"),
            "gate_logits": parameter(np.zeros((n_leaf, n_m)), "gate_logits"),
            "input_weights": parameter(rng.normal(0.0, 0.5, size=(n_leaf, n_m, n_x)), "input_weights"),
        }
        tree = TreeParams(depth=depth, thresholds=thresholds, feature_logits=logits, leaves=leaves)
        cell = cls(tree=tree, n_x=n_x, n_m=n_m, n_classes=n_classes)
        if warmup is not None and np.ndim(warmup) == 3 and np.size(warmup):
            low, high = feature_ranges(warmup, n_x, n_m, memory=cell.memory_states(warmup))
            cell.tree.thresholds.data[:, n_x:] = uniform_thresholds(rng, depth, low[n_x:], high[n_x:])
        return cell

    def parameters(self) -> List[Tensor]:
        return self.tree.parameters()

    def named_parameters(self) -> Dict[str, Tensor]:
        return self.tree.named_parameters()

    # ------------------------------------------------------- tape forward

    def _step_batch(self, x_t: Tensor, m_prev: Tensor, plan: SplitPlan) -> Tuple[Tensor, Tensor]:
        x_aug = concat([x_t, m_prev], axis=-1)
        out = forward_dense(x_aug, self.tree, self.paths, plan)
        gate = round_st(sigmoid(out["gate_logits"]))
        update = tanh_act(batched_matvec(out["input_weights"], x_t))
        return out["class_logits"], add(m_prev, mul(gate, update))

    def unroll_batch(self, inputs: np.ndarray) -> Tuple[Tensor, Tensor]:
        """inputs [B, L, n_x] -> (logits [B, L, n_classes], final memory [B, n_m])."""
        inputs = np.asarray(inputs, dtype=np.float64)
        if inputs.ndim != 3 or inputs.shape[2] != self.n_x:
            raise ShapeError(f"expected inputs [B, L, {self.n_x}], got {inputs.shape}")
        B, L, _ = inputs.shape
        if L < 1:
            raise ValueError("cannot unroll an empty sequence")
        plan = prepare_splits(self.tree)
        m = HiddenState.zeros(self.n_m, batch=B).m
        logits = []
        for t in range(L):
            z, m = self._step_batch(constant(inputs[:, t, :]), m, plan)
            logits.append(z)
        return stack(logits, axis=1), m

    def memory_states(self, inputs: np.ndarray) -> np.ndarray:
        """Hidden states [B, L + 1, n_m] of the dense form, starting from m_0 = 0."""
        inputs = np.asarray(inputs, dtype=np.float64)
        if inputs.ndim != 3 or inputs.shape[2] != self.n_x:
            raise ShapeError(f"expected inputs [B, L, {self.n_x}], got {inputs.shape}")
        B, L, _ = inputs.shape
        with no_tape():
            plan = prepare_splits(self.tree)
            m = HiddenState.zeros(self.n_m, batch=B).m
            states = [m.data]
            for t in range(L):
                _, m = self._step_batch(constant(inputs[:, t, :]), m, plan)
                states.append(m.data)
        return np.stack(states, axis=1)

    def logits_batch(self, inputs: np.ndarray) -> np.ndarray:
        """Class logits [B, L, n_classes] from the dense form, without recording."""
        with no_tape():
            logits, _ = self.unroll_batch(inputs)
        return logits.data

    def predict_batch(self, inputs: np.ndarray) -> np.ndarray:
        """Class indices [B, L] from the dense form, without recording."""
        return np.argmax(self.logits_batch(inputs), axis=-1)

    # ------------------------------------------------------ hard inference

    def infer(self, inputs: np.ndarray, router: Optional[Router] = None) -> InferenceTrace:
        """Tape-free root-to-leaf inference over one sequence."""
        inputs = np.asarray(inputs, dtype=np.float64)
        if inputs.ndim != 2 or inputs.shape[1] != self.n_x:
            raise ShapeError(f"expected inputs [L, {self.n_x}], got {inputs.shape}")
        if inputs.shape[0] < 1:
            raise ValueError("cannot run an empty sequence")
        route = router or (lambda x_aug: forward_traversal(x_aug, self.tree))
        L = inputs.shape[0]
        logits = np.zeros((L, self.n_classes))
        states = np.zeros((L + 1, self.n_m))
        leaves = np.zeros(L, dtype=np.int64)
        for t in range(L):
            x_t, m = inputs[t], states[t]
            leaf, payload = route(np.concatenate([x_t, m]))
            leaves[t] = leaf
            logits[t] = payload["class_logits"]
            gate = round_half_away(sigmoid_np(payload["gate_logits"]))
            # same contraction as batched_matvec so both paths round identically
            update = np.tanh(np.einsum("bmn,bn->bm", payload["input_weights"][None], x_t[None])[0])
            states[t + 1] = m + gate * update
        return InferenceTrace(logits=logits, states=states, leaves=leaves)

    def trace_leaves(self, inputs: np.ndarray) -> List[int]:
        return self.infer(inputs).leaves.tolist()

    def predict(self, inputs: np.ndarray) -> np.ndarray:
        return self.infer(inputs).predictions


def step(cell: RemedeCell, x_t: Tensor, m_prev: HiddenState) -> Tuple[Tensor, HiddenState]:
    """One timestep for a single example: (class logits [n_classes], next state)."""
    if x_t.shape != (cell.n_x,) or m_prev.m.shape != (cell.n_m,):
        raise ShapeError(
            f"step expects x_t ({cell.n_x},) and m ({cell.n_m},), got {x_t.shape} and {m_prev.m.shape}"
        )
    plan = prepare_splits(cell.tree)
    z, m = cell._step_batch(reshape(x_t, (1, cell.n_x)), reshape(m_prev.m, (1, cell.n_m)), plan)
    return reshape(z, (cell.n_classes,)), HiddenState(reshape(m, (cell.n_m,)))


def unroll(cell: RemedeCell, seq) -> Tuple[Tensor, HiddenState]:
    """Per-step logits [L, n_classes] and the final state for one sequence."""
    inputs = np.asarray(getattr(seq, "inputs", seq), dtype=np.float64)
    if inputs.ndim != 2 or inputs.shape[0] == 0:
        raise ValueError(f"unroll needs a non-empty [L, n_x] sequence, got shape {inputs.shape}")
    logits, m = cell.unroll_batch(inputs[None])
    return reshape(logits, logits.shape[1:]), HiddenState(reshape(m, (cell.n_m,)))


def sequence_loss(logits: Tensor, targets: Sequence[int]) -> Tensor:
    """Mean per-step cross-entropy; targets are class indices."""
    targets = np.asarray(targets, dtype=np.int64)
    if logits.ndim != 2 or logits.shape[0] != targets.shape[0]:
        raise ShapeError(f"{logits.shape[0] if logits.ndim else 0} steps of logits but {targets.shape[0]} targets")
    return mean(cross_entropy(logits, targets))


def batch_loss(logits: Tensor, targets: np.ndarray) -> Tensor:
    """Mean over sequences of sequence_loss, for equal-length batches [B, L, C]."""
    targets = np.asarray(targets, dtype=np.int64)
    B, L, C = logits.shape
    if targets.shape != (B, L):
        raise ShapeError(f"targets {targets.shape} do not match logits {logits.shape}")
    return mean(cross_entropy(reshape(logits, (B * L, C)), targets.reshape(-1)))


# ------------------------------------------------------------- checkpoints

def to_checkpoint(cell: RemedeCell, seed: int = 0, task_id: Optional[str] = None) -> Checkpoint:
    leaves = cell.tree.leaves
    return Checkpoint(
        depth=cell.tree.depth,
        n_x=cell.n_x,
        n_m=cell.n_m,
        n_classes=cell.n_classes,
        thresholds=cell.tree.thresholds.data.tolist(),
        feature_logits=cell.tree.feature_logits.data.tolist(),
        leaf_payloads=[
            LeafPayloadRecord(
                class_logits=leaves["class_logits"].data[l].tolist(),
                gate_logits=leaves["gate_logits"].data[l].tolist(),
                input_weights=leaves["input_weights"].data[l].tolist(),
            )
            for l in range(n_leaves(cell.tree.depth))
        ],
        seed=seed,
        task_id=task_id,
    )


def from_checkpoint(ckpt: Checkpoint) -> RemedeCell:
    try:
        leaves = {
            "class_logits": parameter([p.class_logits for p in ckpt.leaf_payloads], "class_logits"),
            "gate_logits": parameter([p.gate_logits for p in ckpt.leaf_payloads], "gate_logits"),
            "input_weights": parameter([p.input_weights for p in ckpt.leaf_payloads], "input_weights"),
        }
        tree = TreeParams(
            depth=ckpt.depth,
            thresholds=parameter(ckpt.thresholds, "thresholds"),
            feature_logits=parameter(ckpt.feature_logits, "feature_logits"),
            leaves=leaves,
        )
        return RemedeCell(tree=tree, n_x=ckpt.n_x, n_m=ckpt.n_m, n_classes=ckpt.n_classes)
    except ValueError as e:
        raise DatasetFormatError(f"inconsistent checkpoint: {e}") from e


def save_checkpoint(cell: RemedeCell, path, seed: int = 0, task_id: Optional[str] = None) -> None:
    # json.dumps uses repr() for floats: shortest round-trip decimal
    text = json.dumps(to_checkpoint(cell, seed, task_id).model_dump(mode="python"))
    Path(path).write_text(text + "\n", encoding="utf-8")


def load_checkpoint(path) -> Tuple[RemedeCell, Checkpoint]:
    try:
        ckpt = Checkpoint.model_validate(json.loads(Path(path).read_text(encoding="utf-8")))
    except json.JSONDecodeError as e:
        raise DatasetFormatError(f"{path}: not valid JSON: {e}") from e
    return from_checkpoint(ckpt), ckpt
