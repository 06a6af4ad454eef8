"""Minimal reverse-mode automatic differentiation on numpy arrays."""
from . import ops
from .gradcheck import grad_check, directional_grad_check
from .ops import (
    RunningStats, avg_pool1d, batch_norm1d, concat, conv1d, dropout, einsum, gather,
    l1_loss, linear, linear_upsample, lstm, matmul, relu, sigmoid, softmax, tanh,
)
from .tensor import Tape, Tensor, get_default_dtype, precision

__all__ = [
    "Tape", "Tensor", "get_default_dtype", "precision", "ops",
    "grad_check", "directional_grad_check",
    "RunningStats", "avg_pool1d", "batch_norm1d", "concat", "conv1d", "dropout",
    "einsum", "gather", "l1_loss", "linear", "linear_upsample", "lstm", "matmul",
    "relu", "sigmoid", "softmax", "tanh",
]
