# remede/autodiff/gradcheck.py
from typing import Callable, Optional

import numpy as np

from remede.autodiff.tensor import Tape, Tensor, backward, no_tape


def tape_gradient(f: Callable[[Tensor], Tensor], params: Tensor) -> np.ndarray:
    with Tape() as tape:
        loss = f(params)
    return backward(tape, loss, [params])[params]


def numeric_gradient(f: Callable[[Tensor], Tensor], params: Tensor, step: float = 1e-6,
                     entries: Optional[np.ndarray] = None) -> np.ndarray:
    """Central differences, evaluated in place on `params` (restored afterwards)."""
    flat = params.data.reshape(-1)
    grad = np.zeros_like(flat)
    idx = np.arange(flat.size) if entries is None else np.asarray(entries)
    with no_tape():
        for i in idx:
            orig = flat[i]
            flat[i] = orig + step
            up = f(params).item()
            flat[i] = orig - step
            down = f(params).item()
            flat[i] = orig
            grad[i] = (up - down) / (2.0 * step)
    return grad.reshape(params.shape)


def finite_diff_check(f: Callable[[Tensor], Tensor], params: Tensor, step: float = 1e-6,
                      n_entries: Optional[int] = None, rng: Optional[np.random.Generator] = None,
                      floor: float = 1e-4) -> float:
    """
    Max relative error between the tape gradient and central differences.
    Entries smaller than `floor` in magnitude are compared absolutely.
    `n_entries` limits the check to that many randomly chosen entries.
    """
    analytic = tape_gradient(f, params).reshape(-1)
    sel = None
    if n_entries is not None and n_entries < params.data.size:
        rng = rng or np.random.default_rng(0)
        sel = rng.choice(params.data.size, size=n_entries, replace=False)
    numeric = numeric_gradient(f, params, step, sel).reshape(-1)
    if sel is not None:
        analytic, numeric = analytic[sel], numeric[sel]
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return float(np.max(np.abs(analytic - numeric) / denom)) if analytic.size else 0.0
