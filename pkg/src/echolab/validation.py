"""Input validation for estimator entry points."""
import numpy as np

from echolab.errors import ShapeMismatch


def check_rir_batch(X, M=None, N=None, dtype=np.float32):
    """Return ``X`` as a finite (n, M, N) array; a single (M, N) RIR is promoted."""
    if hasattr(X, "samples"):
        X = X.samples
    X = np.asarray(X)
    if X.ndim == 2:
        X = X[None]
    if X.ndim != 3:
        raise ShapeMismatch(f"expected RIRs shaped (n, M, N), got {X.shape}")
    if M is not None and X.shape[1] != M:
        raise ShapeMismatch(f"expected {M} channels, got {X.shape[1]}")
    if N is not None and X.shape[2] != N:
        raise ShapeMismatch(f"expected {N} samples per channel, got {X.shape[2]}")
    if not np.issubdtype(X.dtype, np.number):
        raise TypeError(f"RIRs must be numeric, got {X.dtype}")
    if not np.all(np.isfinite(X)):
        raise ValueError("RIRs contain NaN or inf")
    return X.astype(dtype, copy=False)


def check_targets(y, n=None):
    """Validate a (floorplans (n, b, b), heights (n, h)) pair of binary arrays."""
    try:
        Y_lw, y_h = y
    except (TypeError, ValueError) as exc:
        raise ShapeMismatch("targets must be a (floorplans, heights) pair") from exc
    Y_lw = np.asarray(Y_lw)
    y_h = np.asarray(y_h)
    if Y_lw.ndim != 3 or Y_lw.shape[1] != Y_lw.shape[2]:
        raise ShapeMismatch(f"floorplans must be (n, b, b), got {Y_lw.shape}")
    if y_h.ndim != 2:
        raise ShapeMismatch(f"heights must be (n, h), got {y_h.shape}")
    if len(Y_lw) != len(y_h) or (n is not None and len(Y_lw) != n):
        raise ShapeMismatch("targets and inputs disagree in sample count")
    for name, arr in (("floorplans", Y_lw), ("heights", y_h)):
        if not np.isin(arr, (0, 1)).all():
            raise ValueError(f"{name} must be binary")
    return Y_lw.astype(np.float32), y_h.astype(np.float32)
