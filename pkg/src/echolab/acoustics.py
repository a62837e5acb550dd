"""Specular image-source simulation of multichannel RIRs in polygonal prisms.

Sidewalls are vertical, floor and ceiling horizontal, so every specular path
factors into an in-plane path (sidewall bounces, validated against the
polygon) and an independent vertical zig-zag between floor and ceiling.
"""
import math
from dataclasses import dataclass, field

import numpy as np

from echolab.errors import ZeroEnergyRir
from echolab.geometry import RoomSpec
from echolab.materials import MaterialAssignment, assign_materials  # noqa: F401  (re-export)

SPEED_OF_SOUND = 343.0
FS = 8000
N_SAMPLES = 1024
N_MICS = 6
RING_RADIUS = 0.05
ORDER_CAP = 10
SNR_RANGE_DB = (10.0, 20.0)

_EPS = 1e-9


@dataclass(frozen=True, eq=False)
class MicArray:
    mic_positions: np.ndarray
    source: np.ndarray

    @property
    def M(self) -> int:
        return len(self.mic_positions)


def make_mic_array(device, M: int = N_MICS, radius: float = RING_RADIUS) -> MicArray:
    """M equally spaced omni mics on a horizontal ring, loudspeaker at the centre."""
    center = np.asarray(device.xyz if hasattr(device, "xyz") else device, dtype=np.float64)
    ang = 2.0 * np.pi * np.arange(M) / M
    mics = center + radius * np.column_stack([np.cos(ang), np.sin(ang), np.zeros(M)])
    return MicArray(mics, center)


@dataclass(frozen=True)
class ImageSource:
    position: np.ndarray
    order: int
    amplitude: float


@dataclass(eq=False)
class ImageSources:
    """Column-wise store of image sources; iterating yields ImageSource."""

    positions: np.ndarray = field(default_factory=lambda: np.zeros((0, 3)))
    orders: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    amplitudes: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __len__(self):
        return len(self.orders)

    def __iter__(self):
        for p, o, a in zip(self.positions, self.orders, self.amplitudes):
            yield ImageSource(p, int(o), float(a))

    def subset(self, mask) -> "ImageSources":
        return ImageSources(self.positions[mask], self.orders[mask], self.amplitudes[mask])


@dataclass(eq=False)
class RirSet:
    samples: np.ndarray
    fs: int = FS
    snr_db: float = math.inf

    @property
    def M(self) -> int:
        return self.samples.shape[0]

    @property
    def N(self) -> int:
        return self.samples.shape[1]

    def energy(self) -> float:
        return float(np.sum(self.samples.astype(np.float64) ** 2))


def _wall_frames(vertices):
    a = vertices
    b = np.roll(vertices, -1, axis=0)
    d = b - a
    length = np.hypot(d[:, 0], d[:, 1])
    # inward normal of a counter-clockwise polygon
    normal = np.column_stack([-d[:, 1], d[:, 0]]) / length[:, None]
    return a, b, normal


def _segment_distance(points, a, b):
    """Distance from each point (n, 2) to segment a-b (broadcast over walls)."""
    d = b - a
    t = np.clip(((points - a) * d).sum(-1) / np.maximum((d * d).sum(-1), _EPS), 0.0, 1.0)
    return np.linalg.norm(points - (a + t[..., None] * d), axis=-1)


def _first_hits(origins, targets, a, b):
    """Parameters (n, K) where segment origin->target meets each wall.

    Returns (t, u): t along the leg in [0, 1], u along the wall; entries for
    non-intersecting pairs are inf.
    """
    r = targets - origins
    s = b - a
    ao = a[None, :, :] - origins[:, None, :]
    denom = r[:, None, 0] * s[None, :, 1] - r[:, None, 1] * s[None, :, 0]
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (ao[..., 0] * s[None, :, 1] - ao[..., 1] * s[None, :, 0]) / denom
        u = (ao[..., 0] * r[:, None, 1] - ao[..., 1] * r[:, None, 0]) / denom
    ok = (np.abs(denom) > 1e-14) & (u >= -1e-12) & (u <= 1 + 1e-12)
    return np.where(ok, t, np.inf), u


def _affine_interval(f0, f1, lo, hi):
    """Shrink [lo, hi] to where f0 + s (f1 - f0) >= 0."""
    df = f1 - f0
    with np.errstate(divide="ignore", invalid="ignore"):
        root = -f0 / df
    lo = np.where(df > 0, np.maximum(lo, root), lo)
    hi = np.where(df < 0, np.minimum(hi, root), hi)
    flat_bad = (df == 0) & (f0 < 0)
    return lo, np.where(flat_bad, -np.inf, hi)


def _cross(u, v):
    return u[..., 0] * v[..., 1] - u[..., 1] * v[..., 0]


def _clip_to_beam(apex, q1, q2, wa, wb, tol=1e-9):
    """Parameter interval of wall wa-wb inside the cone from ``apex`` through
    window q1-q2, on the far side of the window. Empty when hi <= lo."""
    sigma = np.sign(_cross(q1 - apex, q2 - apex))
    tau = -np.sign(_cross(q2 - q1, apex - q1))
    lo = np.zeros(len(apex))
    hi = np.ones(len(apex))
    for f in (
        lambda p: sigma * _cross(q1 - apex, p - apex),
        lambda p: sigma * _cross(p - apex, q2 - apex),
        lambda p: tau * _cross(q2 - q1, p - q1),
    ):
        lo, hi = _affine_interval(f(wa) + tol, f(wb) + tol, lo, hi)
    return lo, hi


def _planar_images(vertices, source, receiver, max_dist, order_cap):
    """In-plane image sources whose specular path to ``receiver`` is valid.

    Returns positions (n, 2) and orders (n,), order 0 being the source itself.
    """
    recv = np.asarray(receiver, dtype=np.float64)
    a, b, normal = _wall_frames(vertices)
    K = len(a)
    src = np.asarray(source, dtype=np.float64)
    # level entries: image positions, last wall, parent index, window ends
    sd0 = ((src - a) * normal).sum(-1)
    first = np.nonzero(sd0 > _EPS)[0]
    levels = [(src[None, :], np.array([-1]), np.array([-1]), None, None)]
    pos1 = src - 2.0 * sd0[first][:, None] * normal[first]
    levels.append((pos1, first, np.zeros(len(first), dtype=np.int64), a[first], b[first]))
    for _ in range(order_cap - 1):
        pos, last, _, q1, q2 = levels[-1]
        if len(pos) == 0:
            break
        sd = ((pos[:, None, :] - a[None]) * normal[None]).sum(-1)  # (n, K)
        allowed = (sd > _EPS) & (np.arange(K)[None, :] != last[:, None])
        parent, wall = np.nonzero(allowed)
        lo, hi = _clip_to_beam(pos[parent], q1[parent], q2[parent], a[wall], b[wall])
        ok = hi - lo > 1e-12
        parent, wall, lo, hi = parent[ok], wall[ok], lo[ok], hi[ok]
        child = pos[parent] - 2.0 * sd[parent, wall][:, None] * normal[wall]
        d = b[wall] - a[wall]
        w1 = a[wall] + lo[:, None] * d
        w2 = a[wall] + hi[:, None] * d
        # Any completion of the branch unfolds to a path of length
        # |image - p| + (p -> receiver) >= |image - receiver|, p on the window.
        bound = np.maximum(np.linalg.norm(child - recv, axis=1), _segment_distance(child, w1, w2))
        keep = bound <= max_dist
        levels.append((child[keep], wall[keep], parent[keep], w1[keep], w2[keep]))

    src = levels[0][0][0]
    out_pos = [src[None, :]]
    out_ord = [0]
    for k in range(1, len(levels)):
        pos, wall, parent = levels[k][:3]
        n = len(pos)
        if n == 0:
            continue
        valid = np.linalg.norm(pos - recv, axis=1) <= max_dist
        x = np.repeat(recv[None, :], n, axis=0)
        idx = np.arange(n)
        level = k
        while level >= 1 and valid.any():
            lpos, lwall, lparent = levels[level][:3]
            target = lpos[idx]
            w = lwall[idx]
            t, _ = _first_hits(x, target, a, b)
            rows = np.arange(n)
            # the reflection point may coincide with x (a path through a
            # corner reflects off both walls at the shared vertex)
            tw = t[rows, w]
            t = np.where(t > 1e-9, t, np.inf)
            t[rows, w] = np.inf
            # ties with a wall sharing the hit vertex are not occlusions
            blocked = t.min(axis=1) < tw - 1e-9
            valid &= np.isfinite(tw) & (tw > -1e-9) & (tw < 1.0) & ~blocked
            step = np.where(valid, np.clip(tw, 0.0, 1.0), 0.0)
            x = x + step[:, None] * (target - x)
            idx = lparent[idx]
            level -= 1
        # final leg to the real source must be unobstructed
        if valid.any():
            t, _ = _first_hits(x, np.repeat(src[None, :], n, axis=0), a, b)
            t = np.where(t > 1e-9, t, np.inf)
            valid &= t.min(axis=1) >= 1.0 - 1e-9
        if valid.any():
            out_pos.append(pos[valid])
            out_ord.extend([k] * int(valid.sum()))
    pos = np.concatenate(out_pos)
    order = np.array(out_ord, dtype=np.int64)
    # Wall sequences that differ only in the order of two walls met at their
    # shared vertex unfold to the same image: keep one path per position.
    _, first = np.unique(np.round(np.column_stack([pos, order]), 9), axis=0, return_index=True)
    first = np.sort(first)
    return pos[first], order[first]


def _vertical_images(z_src, height, order_cap):
    """Floor/ceiling images: (z, n_floor, n_ceiling) including the source."""
    out = [(z_src, 0, 0)]
    for first in ("floor", "ceiling"):
        z, nf, nc, surf = z_src, 0, 0, first
        for _ in range(order_cap):
            if surf == "floor":
                z, nf, surf = -z, nf + 1, "ceiling"
            else:
                z, nc, surf = 2.0 * height - z, nc + 1, "floor"
            out.append((z, nf, nc))
    return out


def enumerate_image_sources(spec: RoomSpec, max_dist: float = SPEED_OF_SOUND * N_SAMPLES / FS,
                            order_cap: int = ORDER_CAP, receiver=None) -> ImageSources:
    """All specular image sources up to ``order_cap`` bounces and ``max_dist``
    path length, validated for a receiver at the device (or ``receiver``).
    The direct source is never included."""
    poly = spec.polygon.ccw().vertices
    src = spec.device.xyz
    recv = src if receiver is None else np.asarray(receiver, dtype=np.float64)
    planar, planar_order = _planar_images(poly, src[:2], recv[:2], max_dist, order_cap)
    d_plane = np.linalg.norm(planar - recv[:2], axis=1)
    m = spec.materials
    r_wall = math.sqrt(1.0 - m.alpha_sidewall)
    r_floor = math.sqrt(1.0 - m.alpha_floor)
    r_ceil = math.sqrt(1.0 - m.alpha_ceiling)
    pos, orders, amps = [], [], []
    for z, nf, nc in _vertical_images(src[2], spec.height, order_cap):
        order = planar_order + nf + nc
        dist = np.hypot(d_plane, z - recv[2])
        keep = (order >= 1) & (order <= order_cap) & (dist <= max_dist)
        if not keep.any():
            continue
        pos.append(np.column_stack([planar[keep], np.full(keep.sum(), z)]))
        orders.append(order[keep])
        amps.append(r_wall ** planar_order[keep] * r_floor ** nf * r_ceil ** nc)
    if not pos:
        return ImageSources()
    return ImageSources(np.concatenate(pos), np.concatenate(orders), np.concatenate(amps))


def truncate_first_order(images: ImageSources) -> ImageSources:
    return images.subset(images.orders == 1)


def synthesize_rir(images: ImageSources, array: MicArray, fs: int = FS, N: int = N_SAMPLES,
                   c: float = SPEED_OF_SOUND) -> RirSet:
    """Deposit amplitude / distance at t = distance * fs / c per mic with a
    linear two-tap fractional delay; taps at or beyond N are dropped."""
    out = np.zeros((array.M, N))
    if len(images) == 0:
        return RirSet(out, fs)
    if np.any(images.orders < 1):
        raise ValueError("direct path (order 0) must not be synthesized")
    for m, mic in enumerate(array.mic_positions):
        d = np.linalg.norm(images.positions - mic, axis=1)
        t = d * fs / c
        i0 = np.floor(t).astype(np.int64)
        frac = t - i0
        gain = images.amplitudes / d
        for idx, w in ((i0, 1.0 - frac), (i0 + 1, frac)):
            ok = idx < N
            np.add.at(out[m], idx[ok], (gain * w)[ok])
    return RirSet(out, fs)


def add_noise(rir: RirSet, rng, snr_range_db=SNR_RANGE_DB, snr_db=None) -> RirSet:
    """White Gaussian noise, independent per channel and sample, at an SNR
    drawn uniformly from ``snr_range_db`` (or fixed by ``snr_db``)."""
    energy = rir.energy()
    if energy <= 0.0:
        raise ZeroEnergyRir("cannot scale noise to an all-zero RIR")
    rng = np.random.default_rng(rng)
    if snr_db is None:
        snr_db = float(rng.uniform(*snr_range_db))
    if math.isinf(snr_db):
        return RirSet(rir.samples.copy(), rir.fs, snr_db)
    noise_energy = energy / 10.0 ** (snr_db / 10.0)
    sigma = math.sqrt(noise_energy / rir.samples.size)
    noisy = rir.samples + rng.normal(0.0, sigma, size=rir.samples.shape)
    return RirSet(noisy, rir.fs, snr_db)


def simulate_room(spec: RoomSpec, rng=None, fs: int = FS, N: int = N_SAMPLES, first_order_only: bool = False,
                  order_cap: int = ORDER_CAP, M: int = N_MICS, noise: bool = True,
                  c: float = SPEED_OF_SOUND) -> RirSet:
    images = enumerate_image_sources(spec, max_dist=c * N / fs, order_cap=order_cap)
    if first_order_only:
        images = truncate_first_order(images)
    rir = synthesize_rir(images, make_mic_array(spec.device, M), fs, N, c)
    if noise:
        rir = add_noise(rir, rng)
    return rir
