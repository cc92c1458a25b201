# remede/autodiff/tensor.py
"""
Dense tensors and the reverse-mode tape.

A Tensor owns a float64 numpy array. Operations in `remede.autodiff.ops`
record themselves on the active Tape (if any) whenever one of their inputs
requires a gradient; `backward` then walks the tape in reverse order and
accumulates vector-Jacobian products.

The soft-mode switch swaps the straight-through operations for their smooth
surrogates. It exists only for finite-difference testing.
"""
from contextlib import contextmanager
from contextvars import ContextVar
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from remede.errors import GradientError

BackwardFn = Callable[[np.ndarray], Tuple[Optional[np.ndarray], ...]]

_ACTIVE_TAPE: ContextVar[Optional["Tape"]] = ContextVar("remede_active_tape", default=None)
_SOFT_MODE: ContextVar[bool] = ContextVar("remede_soft_mode", default=False)


class Tensor:
    """Row-major float64 array with an optional gradient requirement."""

    __slots__ = ("data", "requires_grad", "name")

    def __init__(self, data, requires_grad: bool = False, name: str = ""):
        arr = np.array(data, dtype=np.float64)
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.name = name

    @classmethod
    def wrap(cls, arr: np.ndarray, requires_grad: bool = False) -> "Tensor":
        """Adopt a freshly computed float64 array without copying it."""
        t = cls.__new__(cls)
        t.data = arr if arr.dtype == np.float64 else arr.astype(np.float64)
        t.requires_grad = requires_grad
        t.name = ""
        return t

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def values(self) -> np.ndarray:
        return self.data.ravel()

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def item(self) -> float:
        if self.data.size != 1:
            raise ValueError(f"item() needs a single element, got shape {self.shape}")
        return float(self.data.reshape(()))

    def numpy(self) -> np.ndarray:
        return self.data.copy()

    def __repr__(self) -> str:
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{tag}, requires_grad={self.requires_grad})"

    # identity semantics: tensors are dictionary keys on the tape
    __hash__ = object.__hash__

    def __getitem__(self, key) -> "Tensor":
        from remede.autodiff.ops import index

        return index(self, key)

    def __add__(self, other: "Tensor") -> "Tensor":
        from remede.autodiff.ops import add

        return add(self, other)

    def __sub__(self, other: "Tensor") -> "Tensor":
        from remede.autodiff.ops import sub

        return sub(self, other)

    def __mul__(self, other: "Tensor") -> "Tensor":
        from remede.autodiff.ops import mul

        return mul(self, other)


def parameter(data, name: str = "") -> Tensor:
    return Tensor(data, requires_grad=True, name=name)


def constant(data) -> Tensor:
    return Tensor(data, requires_grad=False)


@dataclass
class TapeNode:
    output: Tensor
    inputs: Tuple[Tensor, ...]
    backward: BackwardFn
    op: str = ""


@dataclass
class Tape:
    """Ordered record of operations; confined to a single training run/thread."""

    nodes: List[TapeNode] = field(default_factory=list)
    grads: Dict[Tensor, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        self._token = None

    def __enter__(self) -> "Tape":
        self._token = _ACTIVE_TAPE.set(self)
        return self

    def __exit__(self, exc_type, exc, tb):
        _ACTIVE_TAPE.reset(self._token)
        self._token = None
        return False

    def record(self, output: Tensor, inputs: Sequence[Tensor], backward: BackwardFn, op: str = "") -> None:
        self.nodes.append(TapeNode(output, tuple(inputs), backward, op))

    def __contains__(self, t: Tensor) -> bool:
        return any(node.output is t for node in self.nodes)

    def __len__(self) -> int:
        return len(self.nodes)


def active_tape() -> Optional[Tape]:
    return _ACTIVE_TAPE.get()


@contextmanager
def no_tape() -> Iterator[None]:
    token = _ACTIVE_TAPE.set(None)
    try:
        yield
    finally:
        _ACTIVE_TAPE.reset(token)


def is_soft_mode() -> bool:
    return _SOFT_MODE.get()


@contextmanager
def soft_mode(enabled: bool = True) -> Iterator[None]:
    """Replace round_st by its sigmoid input and hardmax_st by softmax (tests only)."""
    token = _SOFT_MODE.set(bool(enabled))
    try:
        yield
    finally:
        _SOFT_MODE.reset(token)


def backward(tape: Tape, loss: Tensor, wrt: Optional[Iterable[Tensor]] = None) -> Dict[Tensor, np.ndarray]:
    """
    Reverse sweep from a scalar loss.
    Returns gradients for every tensor reached; tensors listed in `wrt`
    that the loss does not depend on get zero gradients of their own shape.
    """
    if loss.data.size != 1:
        raise GradientError(f"backward needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad or loss not in tape:
        grads: Dict[Tensor, np.ndarray] = {}
    else:
        grads = {loss: np.ones_like(loss.data)}
        for node in reversed(tape.nodes):
            g_out = grads.get(node.output)
            if g_out is None:
                continue
            for inp, g in zip(node.inputs, node.backward(g_out)):
                if g is None or not inp.requires_grad:
                    continue
                if g.shape != inp.data.shape:
                    g = g.reshape(inp.data.shape)
                prev = grads.get(inp)
                grads[inp] = g.copy() if prev is None else prev + g
    if wrt is not None:
        for p in wrt:
            if p not in grads:
                grads[p] = np.zeros_like(p.data)
    tape.grads = grads
    return grads
