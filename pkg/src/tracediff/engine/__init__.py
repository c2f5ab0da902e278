"""Minimal float64 tensor engine with reverse-mode autodiff."""

from .gradcheck import GradCheckReport, grad_check
from .nn import (
    CrossAttention,
    binary_cross_entropy_with_logits,
    cross_entropy,
    parameter,
    silu,
)
from .optim import Adam
from .tensor import (
    Tensor,
    add,
    concat,
    conv1d,
    log_softmax,
    matmul,
    maxpool1d,
    mean,
    mul,
    narrow,
    neg,
    no_grad,
    reshape,
    sigmoid,
    softmax,
    softplus,
    sub,
    transpose,
    tsum,
    upsample1d,
)

__all__ = [
    "Adam",
    "CrossAttention",
    "GradCheckReport",
    "Tensor",
    "add",
    "binary_cross_entropy_with_logits",
    "concat",
    "conv1d",
    "cross_entropy",
    "grad_check",
    "log_softmax",
    "matmul",
    "maxpool1d",
    "mean",
    "mul",
    "narrow",
    "neg",
    "no_grad",
    "parameter",
    "reshape",
    "sigmoid",
    "silu",
    "softmax",
    "softplus",
    "sub",
    "transpose",
    "tsum",
    "upsample1d",
]
