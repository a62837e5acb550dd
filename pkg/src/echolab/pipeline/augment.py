"""Variable-length time masking of RIR inputs (training only)."""
import numpy as np

N_MASKS = 3
MAX_MASK_LEN = 100


def draw_masks(N, rng, n_masks=N_MASKS, max_len=MAX_MASK_LEN):
    """List of (start, length) spans; lengths uniform on {0..max_len}."""
    spans = []
    for _ in range(n_masks):
        length = int(rng.integers(0, max_len + 1))
        length = min(length, N)
        start = int(rng.integers(0, N - length + 1))
        spans.append((start, length))
    return spans


def time_mask_augment(x, rng, n_masks=N_MASKS, max_len=MAX_MASK_LEN, return_spans=False):
    """Zero ``n_masks`` random spans of a (M, N) RIR (array or RirSet),
    identically on every channel. A (B, M, N) batch gets independent spans
    per sample. The input is never modified."""
    rng = np.random.default_rng(rng)
    rir = x if hasattr(x, "samples") else None
    x = np.array(rir.samples if rir is not None else x, copy=True)
    batch = x if x.ndim == 3 else x[None]
    all_spans = []
    for item in batch:
        spans = draw_masks(item.shape[-1], rng, n_masks, max_len)
        for start, length in spans:
            item[:, start:start + length] = 0
        all_spans.append(spans)
    spans_out = all_spans if x.ndim == 3 else all_spans[0]
    if rir is not None:
        x = type(rir)(x, rir.fs, rir.snr_db)
    return (x, spans_out) if return_spans else x
