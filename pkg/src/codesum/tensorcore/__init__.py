"""Minimal differentiable kernels backing the attention model."""

from .gradcheck import GradientMismatch, gradient_check
from .gru import GruParams, gru_step
from .tensor import (
    L2_NORM_EPS,
    Tensor,
    add,
    constant,
    conv1d_narrow,
    index_last,
    l2_normalize,
    log,
    matmul,
    mul,
    neg,
    pick,
    prelu,
    reshape,
    rows,
    sigmoid,
    softmax,
    tanh,
    tmax,
    tsum,
)

__all__ = [
    "GradientMismatch",
    "GruParams",
    "L2_NORM_EPS",
    "Tensor",
    "add",
    "constant",
    "conv1d_narrow",
    "gradient_check",
    "gru_step",
    "index_last",
    "l2_normalize",
    "log",
    "matmul",
    "mul",
    "neg",
    "pick",
    "prelu",
    "reshape",
    "rows",
    "sigmoid",
    "softmax",
    "tanh",
    "tmax",
    "tsum",
]
