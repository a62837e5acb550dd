"""Float64 gradient-check cases: one small scalar-valued graph per op."""
import numpy as np

from echolab.tensor import core
from echolab.tensor.core import Tensor


def _t(rng, *shape, positive=False):
    data = rng.uniform(0.5, 2.0, size=shape) if positive else rng.standard_normal(shape)
    return Tensor(data, requires_grad=True, dtype=np.float64)


def _weights(rng, shape):
    # fixed random projection so every output element gets a distinct weight
    return Tensor(rng.standard_normal(shape), dtype=np.float64)


def op_cases(seed=0):
    """Dict name -> (fn, tensors); fn() returns a scalar Tensor."""
    rng = np.random.default_rng(seed)
    cases = {}

    a, b = _t(rng, 3, 4), _t(rng, 4)
    w = _weights(rng, (3, 4))
    cases["add_broadcast"] = (lambda: core.sum_(core.add(a, b) * w), [a, b])

    a2, b2 = _t(rng, 3, 1), _t(rng, 1, 4)
    w2 = _weights(rng, (3, 4))
    cases["mul_broadcast"] = (lambda: core.sum_(core.mul(a2, b2) * w2), [a2, b2])

    c = _t(rng, 5)
    w3 = _weights(rng, (5,))
    cases["neg"] = (lambda: core.sum_(core.neg(c) * w3), [c])

    p = _t(rng, 6, positive=True)
    w4 = _weights(rng, (6,))
    cases["power"] = (lambda: core.sum_(core.power(p, 2.7) * w4), [p])

    # keep inputs away from the kinks
    r = Tensor(rng.choice([-1, 1], size=8) * rng.uniform(0.2, 1.0, size=8), requires_grad=True, dtype=np.float64)
    w5 = _weights(rng, (8,))
    cases["relu"] = (lambda: core.sum_(core.relu(r) * w5), [r])
    cases["clamp_min"] = (lambda: core.sum_(core.clamp_min(r, 0.1) * w5), [r])

    s = _t(rng, 7)
    w6 = _weights(rng, (7,))
    cases["sigmoid"] = (lambda: core.sum_(core.sigmoid(s) * w6), [s])

    m = _t(rng, 3, 4, 5)
    w7 = _weights(rng, (3, 5))
    cases["sum_axis"] = (lambda: core.sum_(core.sum_(m, axis=1) * w7), [m])
    w8 = _weights(rng, (3, 4))
    cases["mean_axis"] = (lambda: core.sum_(core.mean(m, axis=-1) * w8), [m])
    w9 = _weights(rng, (12, 5))
    cases["reshape"] = (lambda: core.sum_(core.reshape(m, (12, 5)) * w9), [m])

    x1, x2 = _t(rng, 2, 3), _t(rng, 2, 4)
    w10 = _weights(rng, (2, 7))
    cases["concat"] = (lambda: core.sum_(core.concat([x1, x2], axis=1) * w10), [x1, x2])

    A, B = _t(rng, 3, 4), _t(rng, 4, 2)
    w11 = _weights(rng, (3, 2))
    cases["matmul"] = (lambda: core.sum_(core.matmul(A, B) * w11), [A, B])

    xl, W, bl = _t(rng, 2, 5), _t(rng, 3, 5), _t(rng, 3)
    w12 = _weights(rng, (2, 3))
    cases["linear"] = (lambda: core.sum_(core.linear(xl, W, bl) * w12), [xl, W, bl])

    xc, wc, bc = _t(rng, 2, 3, 11), _t(rng, 4, 3, 5), _t(rng, 4)
    out_len = (11 + 2 * 2 - 5) // 2 + 1
    w13 = _weights(rng, (2, 4, out_len))
    cases["conv1d"] = (lambda: core.sum_(core.conv1d(xc, wc, bc, stride=2, padding=2) * w13), [xc, wc, bc])

    xi, wi, bi = _t(rng, 2, 2, 5, 5), _t(rng, 3, 2, 3, 3), _t(rng, 3)
    w14 = _weights(rng, (2, 3, 5, 5))
    cases["conv2d"] = (lambda: core.sum_(core.conv2d(xi, wi, bi, padding=1) * w14), [xi, wi, bi])

    xu = _t(rng, 1, 2, 3, 3)
    w15 = _weights(rng, (1, 2, 6, 6))
    cases["upsample2d"] = (lambda: core.sum_(core.upsample2d(xu, 2) * w15), [xu])

    xn = _t(rng, 2, 3, 9)
    w16 = _weights(rng, (2, 3, 9))
    cases["channel_norm"] = (lambda: core.sum_(core.channel_norm(xn) * w16), [xn])

    xm = _t(rng, 2, 4, 6, positive=True)
    w17 = _weights(rng, (2, 4))
    from echolab.model import aggregate
    cases["gem_aggregate"] = (lambda: core.sum_(aggregate(xm, 3.0) * w17), [xm])
    cases["power_mean"] = (lambda: core.sum_(core.power_mean(xm, 2.5, axis=1) * _weights(np.random.default_rng(1), (2, 6))), [xm])
    return cases
