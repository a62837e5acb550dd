"""Central finite-difference gradient checking (run in float64)."""
import numpy as np


def numerical_grad(fn, tensors, step=1e-5):
    """Finite-difference gradient of the scalar ``fn()`` w.r.t. each tensor's data."""
    grads = []
    for t in tensors:
        g = np.zeros_like(t.data)
        for i in np.ndindex(t.data.shape):
            orig = t.data[i]
            t.data[i] = orig + step
            fp = float(fn().data)
            t.data[i] = orig - step
            fm = float(fn().data)
            t.data[i] = orig
            g[i] = (fp - fm) / (2.0 * step)
        grads.append(g)
    return grads


def relative_error(analytic, numeric):
    a = np.concatenate([np.ravel(x) for x in analytic])
    n = np.concatenate([np.ravel(x) for x in numeric])
    denom = max(np.linalg.norm(a), np.linalg.norm(n), 1e-12)
    return float(np.linalg.norm(a - n) / denom)


def check_gradients(fn, tensors, step=1e-5):
    """Relative error between backprop and finite differences for ``fn``."""
    for t in tensors:
        t.zero_grad()
    out = fn()
    out.backward()
    analytic = [t.grad.copy() for t in tensors]
    numeric = numerical_grad(fn, tensors, step)
    return relative_error(analytic, numeric)
