from remede.autodiff.tensor import (
    Tape,
    Tensor,
    backward,
    constant,
    is_soft_mode,
    no_tape,
    parameter,
    soft_mode,
)
from remede.autodiff.ops import (
    add,
    batched_matvec,
    concat,
    cross_entropy,
    dot,
    expand_rows,
    hardmax_st,
    index,
    matmul,
    matvec,
    mean,
    mul,
    prod_last,
    reduce_sum,
    reshape,
    round_st,
    scale,
    sigmoid,
    softmax,
    stack,
    sub,
    tanh_act,
    transpose,
)
from remede.autodiff.gradcheck import finite_diff_check

__all__ = [
    "Tape", "Tensor", "backward", "constant", "is_soft_mode", "no_tape",
    "parameter", "soft_mode", "add", "batched_matvec", "concat",
    "cross_entropy", "dot", "expand_rows", "hardmax_st", "index", "matmul", "matvec",
    "mean", "mul", "prod_last", "reduce_sum", "reshape", "round_st", "scale", "sigmoid",
    "softmax", "stack", "sub", "tanh_act", "transpose", "finite_diff_check",
]
