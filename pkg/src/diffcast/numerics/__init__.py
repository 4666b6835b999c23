"""Tensor algebra with reverse-mode autodiff, optimizers, and gradient checking."""

from .gradcheck import GradCheckReport, finite_difference_check
from .optim import Adam, AdamW, OptimizerState, make_optimizer
from .tensor import (
    OpRecord,
    Tensor,
    add,
    as_tensor,
    backward,
    broadcast_to,
    clip,
    concat,
    div,
    exp,
    forward_primitive,
    grad_of,
    leaky_relu,
    log,
    masked_softmax,
    matmul,
    mean,
    mul,
    relu,
    reshape,
    sigmoid,
    slice_,
    softmax,
    sub,
    sum_,
    take,
    tanh,
    trace,
    transpose,
)

__all__ = [
    "Adam",
    "AdamW",
    "GradCheckReport",
    "OpRecord",
    "OptimizerState",
    "Tensor",
    "add",
    "as_tensor",
    "backward",
    "broadcast_to",
    "clip",
    "concat",
    "div",
    "exp",
    "finite_difference_check",
    "forward_primitive",
    "grad_of",
    "leaky_relu",
    "log",
    "make_optimizer",
    "masked_softmax",
    "matmul",
    "mean",
    "mul",
    "relu",
    "reshape",
    "sigmoid",
    "slice_",
    "softmax",
    "sub",
    "sum_",
    "take",
    "tanh",
    "trace",
    "transpose",
]
