"""Minimal reverse-mode automatic differentiation on numpy arrays."""

from .core import Tape, Tensor, active_tape, as_tensor, backward, parameter
from .gradcheck import GradCheckReport, grad_check
from .loss import bce_mean, bce_with_logits_weighted
from .ops import (
    add,
    bias_add,
    bidirectional_scan,
    concat,
    conv1d_valid,
    conv2d_valid,
    dropout,
    elu,
    embedding_lookup,
    global_maxpool,
    lstm_cell,
    lstm_scan,
    matmul,
    maxpool1d,
    mean,
    mul,
    relu,
    reshape,
    reverse,
    sigmoid,
    sum,
    tanh,
)
from .optim import Adam, AdamState, adam_step

__all__ = [
    "Tape",
    "Tensor",
    "active_tape",
    "as_tensor",
    "backward",
    "parameter",
    "GradCheckReport",
    "grad_check",
    "bce_mean",
    "bce_with_logits_weighted",
    "add",
    "bias_add",
    "bidirectional_scan",
    "concat",
    "conv1d_valid",
    "conv2d_valid",
    "dropout",
    "elu",
    "embedding_lookup",
    "global_maxpool",
    "lstm_cell",
    "lstm_scan",
    "matmul",
    "maxpool1d",
    "mean",
    "mul",
    "relu",
    "reshape",
    "reverse",
    "sigmoid",
    "sum",
    "tanh",
    "Adam",
    "AdamState",
    "adam_step",
]
