"""Minimal dense-tensor engine with reverse-mode automatic differentiation."""

from .checkpoint import Container, read_container, write_container
from .core import DEFAULT_DTYPE, Function, Tensor, parameter
from .ops import (
    ConvSpec,
    add,
    add_n,
    concat,
    conv2d,
    maxpool2,
    relu,
    scale,
    sigmoid,
    sum_all,
    upsample_bilinear,
)
from .optim import OptimState, sgd_step, step_decay

__all__ = [
    "DEFAULT_DTYPE",
    "Container",
    "ConvSpec",
    "Function",
    "OptimState",
    "Tensor",
    "add",
    "add_n",
    "concat",
    "conv2d",
    "maxpool2",
    "parameter",
    "read_container",
    "relu",
    "scale",
    "sgd_step",
    "sigmoid",
    "step_decay",
    "sum_all",
    "upsample_bilinear",
    "write_container",
]
