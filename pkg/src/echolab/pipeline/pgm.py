"""8-bit binary PGM (P5) export of floorplans, predictions and saliency."""
from pathlib import Path

import numpy as np

from echolab.errors import ParseError


def to_bytes(values):
    """Quantize [0, 1] values to uint8 with round(255 v)."""
    v = np.asarray(values, dtype=np.float64)
    if v.ndim == 1:
        v = v[None]
    if v.ndim != 2:
        raise ValueError(f"expected a 2-D image, got shape {v.shape}")
    if not np.all(np.isfinite(v)) or v.min(initial=0.0) < 0 or v.max(initial=0.0) > 1:
        raise ValueError("pixel values must lie in [0, 1]")
    return np.round(255.0 * v).astype(np.uint8)


def encode_pgm(values) -> bytes:
    img = to_bytes(values)
    h, w = img.shape
    return f"P5\n{w} {h}\n255\n".encode("ascii") + img.tobytes()


def render_pgm(values, path):
    """Write a row-major P5 file and return its path."""
    path = Path(path)
    path.write_bytes(encode_pgm(values))
    return path


def decode_pgm(data: bytes):
    """Parse a P5 file (maxval 255) into a uint8 array shaped (rows, cols)."""
    tokens = []
    pos = 0
    while len(tokens) < 4:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ParseError("truncated PGM header")
        tokens.append(data[start:pos])
    pos += 1
    if tokens[0] != b"P5":
        raise ParseError(f"not a binary PGM: magic {tokens[0]!r}")
    try:
        w, h, maxval = (int(t) for t in tokens[1:])
    except ValueError as exc:
        raise ParseError("malformed PGM header") from exc
    if maxval != 255:
        raise ParseError(f"unsupported maxval {maxval}")
    body = data[pos:]
    if len(body) != w * h:
        raise ParseError(f"expected {w * h} pixel bytes, found {len(body)}")
    return np.frombuffer(body, dtype=np.uint8).reshape(h, w).copy()


def read_pgm(path):
    return decode_pgm(Path(path).read_bytes())


def composite(left, right, gap=1):
    """Side-by-side image (e.g. ground truth | prediction) with a white gap."""
    a = np.asarray(left, dtype=np.float64)
    b = np.asarray(right, dtype=np.float64)
    if a.shape[0] != b.shape[0]:
        raise ValueError("images must have the same number of rows")
    sep = np.ones((a.shape[0], gap))
    return np.concatenate([a, sep, b], axis=1)


def saliency_image(rir, cam, rows_per_channel=8):
    """Stack normalized |RIR| traces (one band per channel) above a band of
    the saliency curve, giving an (M+1)*rows x N image in [0, 1]."""
    rir = np.abs(np.asarray(rir, dtype=np.float64))
    cam = np.clip(np.asarray(cam, dtype=np.float64), 0.0, 1.0)
    peak = rir.max()
    rir = rir / peak if peak > 0 else rir
    bands = [np.repeat(ch[None], rows_per_channel, axis=0) for ch in rir]
    bands.append(np.repeat(cam[None], rows_per_channel, axis=0))
    return np.concatenate(bands, axis=0)
