"""Parameter containers and the handful of layers the model is built from."""
from collections import OrderedDict

import numpy as np

from echolab.tensor import core
from echolab.tensor.core import Tensor


class Parameter(Tensor):
    """Trainable leaf tensor; only these are collected by Module."""

    def __init__(self, data, name=""):
        super().__init__(data, requires_grad=True, name=name)


class Module:
    """Attribute-registered parameters and submodules, named like ``enc.0.conv.weight``."""

    def named_parameters(self, prefix=""):
        out = OrderedDict()
        for key, value in vars(self).items():
            if isinstance(value, Parameter):
                out[prefix + key] = value
            elif isinstance(value, Module):
                out.update(value.named_parameters(prefix + key + "."))
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        out.update(item.named_parameters(f"{prefix}{key}.{i}."))
        return out

    def parameters(self):
        return list(self.named_parameters().values())

    def zero_grad(self):
        for p in self.parameters():
            p.zero_grad()

    def astype(self, dtype):
        for p in self.parameters():
            p.data = p.data.astype(dtype)
            p.grad = np.zeros_like(p.data)
        return self

    def state_dict(self):
        return OrderedDict((k, v.data.copy()) for k, v in self.named_parameters().items())

    def load_state_dict(self, state):
        params = self.named_parameters()
        missing = set(params) - set(state)
        extra = set(state) - set(params)
        if missing or extra:
            raise KeyError(f"state mismatch: missing {sorted(missing)}, unexpected {sorted(extra)}")
        for k, p in params.items():
            arr = np.asarray(state[k])
            if arr.shape != p.shape:
                raise ValueError(f"{k}: shape {arr.shape} != {p.shape}")
            p.data = arr.astype(p.dtype).copy()

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)


def _uniform(rng, fan_in, shape, dtype):
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


def _he(rng, fan_in, shape, dtype):
    return (rng.standard_normal(shape) * np.sqrt(2.0 / fan_in)).astype(dtype)


class Linear(Module):
    def __init__(self, n_in, n_out, rng, dtype=core.DEFAULT_DTYPE):
        self.weight = Parameter(_uniform(rng, n_in, (n_out, n_in), dtype))
        self.bias = Parameter(np.zeros(n_out, dtype=dtype))

    def forward(self, x):
        return core.linear(x, self.weight, self.bias)


class Conv1d(Module):
    def __init__(self, c_in, c_out, kernel, rng, stride=1, padding=None, dtype=core.DEFAULT_DTYPE):
        self.weight = Parameter(_he(rng, c_in * kernel, (c_out, c_in, kernel), dtype))
        self.bias = Parameter(np.zeros(c_out, dtype=dtype))
        self.stride = stride
        self.padding = (kernel - 1) // 2 if padding is None else padding

    def forward(self, x):
        return core.conv1d(x, self.weight, self.bias, self.stride, self.padding)


class Conv2d(Module):
    def __init__(self, c_in, c_out, kernel, rng, padding=None, dtype=core.DEFAULT_DTYPE):
        self.weight = Parameter(_he(rng, c_in * kernel * kernel, (c_out, c_in, kernel, kernel), dtype))
        self.bias = Parameter(np.zeros(c_out, dtype=dtype))
        self.padding = (kernel - 1) // 2 if padding is None else padding

    def forward(self, x):
        return core.conv2d(x, self.weight, self.bias, self.padding)


class ChannelNorm(Module):
    """Per-sample, per-channel standardization followed by a learned affine map."""

    def __init__(self, channels, spatial_dims=1, dtype=core.DEFAULT_DTYPE):
        shape = (channels,) + (1,) * spatial_dims
        self.gain = Parameter(np.ones(shape, dtype=dtype))
        self.shift = Parameter(np.zeros(shape, dtype=dtype))

    def forward(self, x):
        return core.channel_norm(x) * self.gain + self.shift
