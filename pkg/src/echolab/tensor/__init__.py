from echolab.tensor.core import (
    Tensor,
    add,
    channel_norm,
    clamp_min,
    concat,
    conv1d,
    conv2d,
    linear,
    matmul,
    mean,
    mul,
    neg,
    power,
    power_mean,
    relu,
    reshape,
    sigmoid,
    sum_,
    upsample2d,
)
from echolab.tensor.nn import ChannelNorm, Conv1d, Conv2d, Linear, Module, Parameter
from echolab.tensor.optim import Adam, AdamState, LrSchedule, adam_step, lr_at
from echolab.tensor.serialize import load_checkpoint, save_checkpoint

__all__ = [
    "Tensor", "add", "channel_norm", "clamp_min", "concat", "conv1d", "conv2d", "linear", "matmul",
    "mean", "mul", "neg", "power", "power_mean", "relu", "reshape", "sigmoid", "sum_", "upsample2d",
    "ChannelNorm", "Conv1d", "Conv2d", "Linear", "Module", "Parameter",
    "Adam", "AdamState", "LrSchedule", "adam_step", "lr_at",
    "load_checkpoint", "save_checkpoint",
]
