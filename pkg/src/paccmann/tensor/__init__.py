"""Minimal numpy tensor engine: autograd primitives, layers, Adam."""

from .autograd import (
    Tensor,
    activation,
    add,
    as_tensor,
    batch_norm,
    concat,
    conv,
    conv1d,
    conv2d,
    dropout,
    embedding,
    getitem,
    matmul,
    max_pool,
    mean,
    mse_loss,
    mul,
    relu,
    reshape,
    sigmoid,
    softmax_masked,
    square,
    stack,
    sub,
    sum,
    swapaxes,
    tanh,
)
from .gradcheck import grad_check
from .nn import BatchNormState, dense, glorot, gru_cell, gru_params, gru_update, ones, zeros
from .optim import Adam, AdamState, LrSchedule, adam_step

__all__ = [
    "Adam", "AdamState", "BatchNormState", "LrSchedule", "Tensor", "activation", "adam_step",
    "add", "as_tensor", "batch_norm", "concat", "conv", "conv1d", "conv2d", "dense", "dropout",
    "embedding", "getitem", "glorot", "grad_check", "gru_cell", "gru_params", "gru_update",
    "matmul", "max_pool", "mean", "mse_loss", "mul", "ones", "relu", "reshape", "sigmoid",
    "softmax_masked", "square", "stack", "sub", "sum", "swapaxes", "tanh", "zeros",
]
