# remede/autodiff/ops.py
"""
Differentiable operations over Tensors.

Elementwise ops require exactly equal shapes; there is no implicit
broadcasting. Row replication is explicit (`expand_rows`).
"""
from typing import Sequence, Tuple, Union

import numpy as np

from remede.autodiff.tensor import Tensor, active_tape, is_soft_mode
from remede.errors import ShapeError

IntArray = Union[int, Sequence[int], np.ndarray]


def _result(data: np.ndarray, inputs: Tuple[Tensor, ...], backward, op: str) -> Tensor:
    needs_grad = any(t.requires_grad for t in inputs)
    out = Tensor.wrap(np.asarray(data, dtype=np.float64), requires_grad=needs_grad)
    tape = active_tape()
    if needs_grad and tape is not None:
        tape.record(out, inputs, backward, op)
    return out


def _same_shape(a: Tensor, b: Tensor, op: str) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"{op}: shape mismatch {a.shape} vs {b.shape}")


def round_half_away(x: np.ndarray) -> np.ndarray:
    # np.round rounds half to even and floor(x + 0.5) misrounds 0.49999999999999994
    r = np.trunc(x)
    frac = x - r
    return r + np.where(np.abs(frac) >= 0.5, np.sign(x), 0.0)


def sigmoid_np(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    e = np.exp(-np.abs(z))
    return np.where(z >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def softmax_np(z: np.ndarray) -> np.ndarray:
    shifted = z - np.max(z, axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=-1, keepdims=True)


def hardmax_np(z: np.ndarray) -> np.ndarray:
    # np.argmax picks the lowest index on ties
    idx = np.argmax(z, axis=-1)
    out = np.zeros_like(z, dtype=np.float64)
    np.put_along_axis(out, idx[..., None], 1.0, axis=-1)
    return out


# ---------------------------------------------------------------- arithmetic

def add(a: Tensor, b: Tensor) -> Tensor:
    _same_shape(a, b, "add")
    return _result(a.data + b.data, (a, b), lambda g: (g, g), "add")


def sub(a: Tensor, b: Tensor) -> Tensor:
    _same_shape(a, b, "sub")
    return _result(a.data - b.data, (a, b), lambda g: (g, -g), "sub")


def mul(a: Tensor, b: Tensor) -> Tensor:
    _same_shape(a, b, "mul")
    ad, bd = a.data, b.data
    return _result(ad * bd, (a, b), lambda g: (g * bd, g * ad), "mul")


def scale(a: Tensor, c: float) -> Tensor:
    c = float(c)
    return _result(a.data * c, (a,), lambda g: (g * c,), "scale")


def matvec(W: Tensor, v: Tensor) -> Tensor:
    if W.ndim != 2 or v.ndim != 1 or W.shape[1] != v.shape[0]:
        raise ShapeError(f"matvec: cannot multiply {W.shape} by {v.shape}")
    Wd, vd = W.data, v.data
    return _result(Wd @ vd, (W, v), lambda g: (np.outer(g, vd), Wd.T @ g), "matvec")


def matmul(A: Tensor, B: Tensor) -> Tensor:
    if A.ndim != 2 or B.ndim != 2 or A.shape[1] != B.shape[0]:
        raise ShapeError(f"matmul: cannot multiply {A.shape} by {B.shape}")
    Ad, Bd = A.data, B.data
    return _result(Ad @ Bd, (A, B), lambda g: (g @ Bd.T, Ad.T @ g), "matmul")


def batched_matvec(W: Tensor, v: Tensor) -> Tensor:
    """W[B, m, n] · v[B, n] -> [B, m], one matrix-vector product per row."""
    if W.ndim != 3 or v.ndim != 2 or W.shape[0] != v.shape[0] or W.shape[2] != v.shape[1]:
        raise ShapeError(f"batched_matvec: cannot multiply {W.shape} by {v.shape}")
    Wd, vd = W.data, v.data

    def _bw(g):
        return g[:, :, None] * vd[:, None, :], np.einsum("bmn,bm->bn", Wd, g)

    return _result(np.einsum("bmn,bn->bm", Wd, vd), (W, v), _bw, "batched_matvec")


# ------------------------------------------------------------- activations

def sigmoid(z: Tensor) -> Tensor:
    s = sigmoid_np(z.data)
    return _result(s, (z,), lambda g: (g * s * (1.0 - s),), "sigmoid")


def tanh_act(z: Tensor) -> Tensor:
    t = np.tanh(z.data)
    return _result(t, (z,), lambda g: (g * (1.0 - t * t),), "tanh")


def round_st(z: Tensor) -> Tensor:
    """Round half away from zero; the backward pass is the identity (ST)."""
    if is_soft_mode():
        return _result(z.data.copy(), (z,), lambda g: (g,), "round_st[soft]")
    return _result(round_half_away(z.data), (z,), lambda g: (g,), "round_st")


def _softmax_vjp(s: np.ndarray):
    def _bw(g):
        return (s * (g - np.sum(g * s, axis=-1, keepdims=True)),)

    return _bw


def softmax(logits: Tensor) -> Tensor:
    """Softmax along the last axis (max-shifted)."""
    if logits.ndim == 0 or logits.shape[-1] < 1:
        raise ShapeError(f"softmax: need at least one logit, got shape {logits.shape}")
    s = softmax_np(logits.data)
    return _result(s, (logits,), _softmax_vjp(s), "softmax")


def hardmax_st(logits: Tensor) -> Tensor:
    """One-hot argmax along the last axis; backward uses the softmax Jacobian."""
    if logits.ndim == 0 or logits.shape[-1] < 1:
        raise ShapeError(f"hardmax_st: need at least one logit, got shape {logits.shape}")
    if is_soft_mode():
        return softmax(logits)
    s = softmax_np(logits.data)
    return _result(hardmax_np(logits.data), (logits,), _softmax_vjp(s), "hardmax_st")


def cross_entropy(logits: Tensor, target: IntArray) -> Tensor:
    """
    -log softmax(logits)[target].
    logits[n] with an int target gives a scalar; logits[B, n] with B targets
    gives the per-row losses [B].
    """
    z = logits.data
    if z.ndim not in (1, 2):
        raise ShapeError(f"cross_entropy: logits must be 1-D or 2-D, got {logits.shape}")
    n = z.shape[-1]
    tgt = np.asarray(target, dtype=np.int64)
    if z.ndim == 1 and tgt.ndim != 0:
        raise ShapeError("cross_entropy: 1-D logits take a single target index")
    if z.ndim == 2 and tgt.shape != (z.shape[0],):
        raise ShapeError(f"cross_entropy: expected {z.shape[0]} targets, got shape {tgt.shape}")
    if np.any(tgt < 0) or np.any(tgt >= n):
        raise ValueError(f"cross_entropy: target index out of range [0, {n})")

    shifted = z - np.max(z, axis=-1, keepdims=True)
    log_norm = np.log(np.sum(np.exp(shifted), axis=-1, keepdims=True))
    log_probs = shifted - log_norm
    probs = np.exp(log_probs)
    onehot = np.zeros_like(z)
    if z.ndim == 1:
        onehot[int(tgt)] = 1.0
        loss = -log_probs[int(tgt)]
    else:
        np.put_along_axis(onehot, tgt[:, None], 1.0, axis=-1)
        loss = -np.take_along_axis(log_probs, tgt[:, None], axis=-1)[:, 0]

    def _bw(g):
        g = np.asarray(g)
        if z.ndim == 1:
            return ((probs - onehot) * g,)
        return ((probs - onehot) * g[:, None],)

    return _result(np.asarray(loss), (logits,), _bw, "cross_entropy")


# ----------------------------------------------------------------- plumbing

def reduce_sum(a: Tensor, axis: int | None = None) -> Tensor:
    shape = a.shape
    if axis is None:
        return _result(np.asarray(a.data.sum()), (a,), lambda g: (np.full(shape, float(g)),), "sum")
    ax = axis % a.ndim

    def _bw(g):
        return (np.broadcast_to(np.expand_dims(g, ax), shape).copy(),)

    return _result(a.data.sum(axis=ax), (a,), _bw, "sum")


def mean(a: Tensor, axis: int | None = None) -> Tensor:
    count = a.data.size if axis is None else a.shape[axis]
    return scale(reduce_sum(a, axis), 1.0 / count)


def dot(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim != 1:
        raise ShapeError(f"dot: expected 1-D tensors, got {a.shape}")
    return reduce_sum(mul(a, b))


def reshape(a: Tensor, shape: Tuple[int, ...]) -> Tensor:
    src = a.shape
    try:
        data = a.data.reshape(shape)
    except ValueError as e:
        raise ShapeError(f"reshape: {src} -> {shape}: {e}") from e
    return _result(data.copy(), (a,), lambda g: (g.reshape(src),), "reshape")


def transpose(a: Tensor) -> Tensor:
    if a.ndim != 2:
        raise ShapeError(f"transpose: expected 2-D tensor, got {a.shape}")
    return _result(a.data.T.copy(), (a,), lambda g: (g.T,), "transpose")


def index(a: Tensor, key) -> Tensor:
    """Gather `a[key]`; the backward pass scatter-adds into a zero tensor."""
    shape = a.shape

    def _bw(g):
        z = np.zeros(shape)
        np.add.at(z, key, g)
        return (z,)

    return _result(np.array(a.data[key]), (a,), _bw, "index")


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    tensors = tuple(tensors)
    arrays = [t.data for t in tensors]
    try:
        data = np.concatenate(arrays, axis=axis)
    except ValueError as e:
        raise ShapeError(f"concat: {e}") from e
    ax = axis % data.ndim
    cuts = np.cumsum([arr.shape[ax] for arr in arrays])[:-1]
    return _result(data, tensors, lambda g: tuple(np.split(g, cuts, axis=ax)), "concat")


def stack(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = tuple(tensors)
    try:
        data = np.stack([t.data for t in tensors], axis=axis)
    except ValueError as e:
        raise ShapeError(f"stack: {e}") from e
    ax = axis % data.ndim

    def _bw(g):
        return tuple(np.take(g, i, axis=ax) for i in range(len(tensors)))

    return _result(data, tensors, _bw, "stack")


def expand_rows(v: Tensor, rows: int) -> Tensor:
    """Replicate v[n] into [rows, n]."""
    if v.ndim != 1:
        raise ShapeError(f"expand_rows: expected 1-D tensor, got {v.shape}")
    return _result(np.tile(v.data, (rows, 1)), (v,), lambda g: (g.sum(axis=0),), "expand_rows")


def prod_last(a: Tensor) -> Tensor:
    """Product over the last axis; exact gradient even when factors are zero."""
    x = a.data
    ones = np.ones(x.shape[:-1] + (1,))
    prefix = np.concatenate([ones, np.cumprod(x[..., :-1], axis=-1)], axis=-1)
    rev = np.flip(x, axis=-1)
    suffix = np.flip(np.concatenate([ones, np.cumprod(rev[..., :-1], axis=-1)], axis=-1), axis=-1)

    def _bw(g):
        return (g[..., None] * prefix * suffix,)

    return _result(np.prod(x, axis=-1), (a,), _bw, "prod")
