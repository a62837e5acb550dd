"""Dense tensors with reverse-mode differentiation on a numpy backend.

Each op returns a new Tensor holding its parents and a closure that pushes the
output gradient back to them. ``backward`` topologically sorts the recorded
graph and runs the closures once each, in reverse order.
"""
import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from echolab.errors import NonScalarRoot, ShapeMismatch

DEFAULT_DTYPE = np.float32


def _as_array(data, dtype=None):
    arr = np.asarray(data)
    if dtype is not None:
        return arr.astype(dtype, copy=False)
    if not np.issubdtype(arr.dtype, np.floating):
        arr = arr.astype(DEFAULT_DTYPE)
    return arr


class Tensor:
    def __init__(self, data, requires_grad=False, _parents=(), _op="", name="", dtype=None):
        self.data = _as_array(data, dtype)
        self.requires_grad = bool(requires_grad)
        self.grad = np.zeros_like(self.data) if self.requires_grad else None
        self._parents = tuple(_parents)
        self._backward = None
        self._op = _op
        self.name = name

    # -- basics ---------------------------------------------------------------
    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self):
        return self.data.size

    def numpy(self):
        return self.data

    def item(self):
        return self.data.item()

    def __repr__(self):
        return f"Tensor(shape={self.shape}, op={self._op or 'leaf'}, requires_grad={self.requires_grad})"

    def zero_grad(self):
        if self.requires_grad:
            self.grad = np.zeros_like(self.data)

    def detach(self):
        return Tensor(self.data.copy())

    def _accum(self, g):
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def backward(self):
        if self.size != 1:
            raise NonScalarRoot(f"backward needs a scalar root, got shape {self.shape}")
        order = _topological_order(self)
        for node in order:
            if node._parents and node.requires_grad:
                node.grad = np.zeros_like(node.data)
        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # -- operator sugar ---------------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, neg(_wrap(other, self.dtype)))

    def __rsub__(self, other):
        return add(_wrap(other, self.dtype), neg(self))

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            return mul(self, power(other, -1.0))
        return mul(self, 1.0 / other)

    def __neg__(self):
        return neg(self)

    def __pow__(self, p):
        return power(self, p)

    def __matmul__(self, other):
        return matmul(self, other)

    def sum(self, axis=None, keepdims=False):
        return sum_(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis, keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def relu(self):
        return relu(self)

    def sigmoid(self):
        return sigmoid(self)


def _topological_order(root):
    order, seen = [], set()
    stack = [(root, False)]
    while stack:
        node, done = stack.pop()
        if done:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in seen:
                stack.append((p, False))
    return order


def _wrap(x, dtype=None):
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=dtype if dtype is not None else DEFAULT_DTYPE))


def _result(data, parents, op, backward):
    parents = tuple(parents)
    needs = any(p.requires_grad for p in parents)
    out = Tensor(data, requires_grad=False, _parents=parents if needs else (), _op=op)
    if needs:
        out.requires_grad = True
        out._backward = backward
    return out


def _unbroadcast(g, shape):
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


# ---------------------------------------------------------------------------
# elementwise


def add(a, b):
    a, b = _wrap(a), _wrap(b, a.dtype if isinstance(a, Tensor) else None)
    try:
        data = a.data + b.data
    except ValueError as exc:
        raise ShapeMismatch(f"add: {a.shape} vs {b.shape}") from exc

    def backward(g):
        if a.requires_grad:
            a._accum(_unbroadcast(g, a.shape))
        if b.requires_grad:
            b._accum(_unbroadcast(g, b.shape))

    return _result(data, (a, b), "add", backward)


def mul(a, b):
    a = _wrap(a)
    b = _wrap(b, a.dtype)
    try:
        data = a.data * b.data
    except ValueError as exc:
        raise ShapeMismatch(f"mul: {a.shape} vs {b.shape}") from exc

    def backward(g):
        if a.requires_grad:
            a._accum(_unbroadcast(g * b.data, a.shape))
        if b.requires_grad:
            b._accum(_unbroadcast(g * a.data, b.shape))

    return _result(data, (a, b), "mul", backward)


def neg(a):
    def backward(g):
        a._accum(-g)

    return _result(-a.data, (a,), "neg", backward)


def power(a, p):
    p = float(p)
    data = a.data ** p

    def backward(g):
        a._accum(g * p * a.data ** (p - 1.0))

    return _result(data, (a,), "pow", backward)


def relu(a):
    mask = a.data > 0

    def backward(g):
        a._accum(g * mask)

    return _result(a.data * mask, (a,), "relu", backward)


def clamp_min(a, lo):
    mask = a.data > lo

    def backward(g):
        a._accum(g * mask)

    return _result(np.where(mask, a.data, np.asarray(lo, dtype=a.dtype)), (a,), "clamp_min", backward)


def sigmoid(a):
    x = a.data
    # split by sign to avoid exp overflow
    e = np.exp(-np.abs(x))
    s = np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e)).astype(x.dtype)

    def backward(g):
        a._accum(g * s * (1.0 - s))

    return _result(s, (a,), "sigmoid", backward)


# ---------------------------------------------------------------------------
# reductions and shape


def sum_(a, axis=None, keepdims=False):
    data = a.data.sum(axis=axis, keepdims=keepdims)

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        a._accum(np.broadcast_to(g, a.shape))

    return _result(data, (a,), "sum", backward)


def mean(a, axis=None, keepdims=False):
    data = a.data.mean(axis=axis, keepdims=keepdims)
    count = a.size // max(data.size, 1)

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        a._accum(np.broadcast_to(g, a.shape) / count)

    return _result(data, (a,), "mean", backward)


def power_mean(a, rho, axis=-1):
    """(mean x^rho)^(1/rho) along ``axis`` for non-negative ``a``.

    Exact in the forward pass; where the mean is zero (an all-zero slice)
    the gradient is taken as zero instead of the infinite one-sided limit.
    """
    x = a.data
    m = np.mean(x ** rho, axis=axis, keepdims=True)
    out = m ** (1.0 / rho)
    count = x.shape[axis]

    def backward(g):
        g = np.expand_dims(g, axis)
        with np.errstate(divide="ignore", invalid="ignore"):
            scale = np.where(m > 0, out ** (1.0 - rho), 0.0)
        a._accum(g * scale * x ** (rho - 1.0) / count)

    return _result(np.squeeze(out, axis=axis), (a,), "power_mean", backward)


def reshape(a, shape):
    try:
        data = a.data.reshape(shape)
    except ValueError as exc:
        raise ShapeMismatch(f"reshape {a.shape} -> {shape}") from exc

    def backward(g):
        a._accum(g.reshape(a.shape))

    return _result(data, (a,), "reshape", backward)


def concat(tensors, axis=0):
    tensors = [_wrap(t) for t in tensors]
    try:
        data = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError as exc:
        raise ShapeMismatch(f"concat: {[t.shape for t in tensors]}") from exc
    bounds = np.cumsum([0] + [t.shape[axis] for t in tensors])

    def backward(g):
        for t, lo, hi in zip(tensors, bounds[:-1], bounds[1:]):
            if t.requires_grad:
                idx = [slice(None)] * g.ndim
                idx[axis] = slice(lo, hi)
                t._accum(g[tuple(idx)])

    return _result(data, tensors, "concat", backward)


def matmul(a, b):
    if a.shape[-1] != b.shape[-2 if b.ndim > 1 else 0]:
        raise ShapeMismatch(f"matmul: {a.shape} @ {b.shape}")
    data = a.data @ b.data

    def backward(g):
        if a.requires_grad:
            a._accum(_unbroadcast(g @ np.swapaxes(b.data, -1, -2), a.shape))
        if b.requires_grad:
            b._accum(_unbroadcast(np.swapaxes(a.data, -1, -2) @ g, b.shape))

    return _result(data, (a, b), "matmul", backward)


# ---------------------------------------------------------------------------
# network layers


def linear(x, weight, bias=None):
    """y = x W^T + b with W of shape (out, in); x is (..., in)."""
    if x.shape[-1] != weight.shape[1]:
        raise ShapeMismatch(f"linear: input {x.shape} vs weight {weight.shape}")
    data = x.data @ weight.data.T
    if bias is not None:
        data = data + bias.data
    parents = (x, weight) if bias is None else (x, weight, bias)

    def backward(g):
        if x.requires_grad:
            x._accum(g @ weight.data)
        g2 = g.reshape(-1, g.shape[-1])
        if weight.requires_grad:
            weight._accum(g2.T @ x.data.reshape(-1, x.shape[-1]))
        if bias is not None and bias.requires_grad:
            bias._accum(g2.sum(axis=0))

    return _result(data, parents, "linear", backward)


def conv1d(x, weight, bias=None, stride=1, padding=0):
    """x (B, C, L), weight (O, C, K) -> (B, O, L_out)."""
    B, C, L = x.shape
    O, Cw, K = weight.shape
    if C != Cw:
        raise ShapeMismatch(f"conv1d: input channels {C} vs weight {weight.shape}")
    xp = np.pad(x.data, ((0, 0), (0, 0), (padding, padding))) if padding else x.data
    Lout = (xp.shape[2] - K) // stride + 1
    if Lout < 1:
        raise ShapeMismatch(f"conv1d: length {L} too short for kernel {K}")
    cols = sliding_window_view(xp, K, axis=2)[:, :, ::stride][:, :, :Lout]  # (B, C, Lout, K)
    data = np.tensordot(cols, weight.data, axes=([1, 3], [1, 2])).transpose(0, 2, 1)  # (B, O, Lout)
    if bias is not None:
        data = data + bias.data[None, :, None]
    parents = (x, weight) if bias is None else (x, weight, bias)

    def backward(g):
        if weight.requires_grad:
            weight._accum(np.tensordot(g, cols, axes=([0, 2], [0, 2])))
        if bias is not None and bias.requires_grad:
            bias._accum(g.sum(axis=(0, 2)))
        if x.requires_grad:
            gcols = np.tensordot(g, weight.data, axes=([1], [0]))  # (B, Lout, C, K)
            gxp = np.zeros_like(xp)
            span = stride * (Lout - 1) + 1
            for k in range(K):
                gxp[:, :, k:k + span:stride] += gcols[:, :, :, k].transpose(0, 2, 1)
            x._accum(gxp[:, :, padding:padding + L] if padding else gxp)

    return _result(data, parents, "conv1d", backward)


def conv2d(x, weight, bias=None, padding=0):
    """Stride-1 convolution: x (B, C, H, W), weight (O, C, kh, kw)."""
    B, C, H, W = x.shape
    O, Cw, kh, kw = weight.shape
    if C != Cw:
        raise ShapeMismatch(f"conv2d: input channels {C} vs weight {weight.shape}")
    xp = np.pad(x.data, ((0, 0), (0, 0), (padding, padding), (padding, padding))) if padding else x.data
    Ho, Wo = xp.shape[2] - kh + 1, xp.shape[3] - kw + 1
    if Ho < 1 or Wo < 1:
        raise ShapeMismatch(f"conv2d: input {x.shape} smaller than kernel")
    cols = sliding_window_view(xp, (kh, kw), axis=(2, 3))  # (B, C, Ho, Wo, kh, kw)
    data = np.tensordot(cols, weight.data, axes=([1, 4, 5], [1, 2, 3])).transpose(0, 3, 1, 2)
    if bias is not None:
        data = data + bias.data[None, :, None, None]
    parents = (x, weight) if bias is None else (x, weight, bias)

    def backward(g):
        if weight.requires_grad:
            weight._accum(np.tensordot(g, cols, axes=([0, 2, 3], [0, 2, 3])))
        if bias is not None and bias.requires_grad:
            bias._accum(g.sum(axis=(0, 2, 3)))
        if x.requires_grad:
            gcols = np.tensordot(g, weight.data, axes=([1], [0]))  # (B, Ho, Wo, C, kh, kw)
            gxp = np.zeros_like(xp)
            for i in range(kh):
                for j in range(kw):
                    gxp[:, :, i:i + Ho, j:j + Wo] += gcols[..., i, j].transpose(0, 3, 1, 2)
            if padding:
                gxp = gxp[:, :, padding:padding + H, padding:padding + W]
            x._accum(gxp)

    return _result(data, parents, "conv2d", backward)


def upsample2d(x, factor=2):
    """Nearest-neighbour upsampling of (B, C, H, W)."""
    data = x.data.repeat(factor, axis=2).repeat(factor, axis=3)
    B, C, H, W = x.shape

    def backward(g):
        x._accum(g.reshape(B, C, H, factor, W, factor).sum(axis=(3, 5)))

    return _result(data, (x,), "upsample2d", backward)


def channel_norm(x, eps=1e-5):
    """Standardize each (sample, channel) slice over its remaining axes."""
    axes = tuple(range(2, x.ndim))
    if not axes:
        raise ShapeMismatch("channel_norm needs at least one spatial axis")
    mu = x.data.mean(axis=axes, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=axes, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv

    def backward(g):
        gm = g.mean(axis=axes, keepdims=True)
        gxm = (g * xhat).mean(axis=axes, keepdims=True)
        x._accum(inv * (g - gm - xhat * gxm))

    return _result(xhat, (x,), "channel_norm", backward)
