"""Procedural room synthesis: standard room families, crumpling, device
placement, line-of-sight labelling, and polygon layout import."""
import json
import math
from dataclasses import dataclass, field

import numpy as np

from echolab.errors import (
    CrumpleFailed,
    DeviceOutsidePolygon,
    NonSimplePolygon,
    ParseError,
    PlacementFailed,
    RoomRegenerate,
)
from echolab.materials import MaterialAssignment, assign_materials

FAMILIES = ("shoebox", "pentagonal", "hexagonal", "L", "T")
CONVEX_FAMILIES = ("shoebox", "pentagonal", "hexagonal")

SIZE_RANGE_LW = (2.0, 5.0)
SIZE_RANGE_H = (3.0, 5.0)
DEVICE_Z_RANGE = (1.0, 1.5)
MAX_SHIFT = 0.5
PLACEMENT_SCALE = 0.7
CRUMPLE_RETRIES = 100
PLACEMENT_RETRIES = 1000
# Keeps the 5 cm microphone ring off the walls.
MIN_WALL_CLEARANCE = 0.1
ARC_CHORD_TOL = 0.1

_EPS = 1e-12


@dataclass(frozen=True)
class SizeParams:
    s_l: float
    s_w: float
    s_h: float = 3.0


@dataclass(frozen=True)
class DevicePose:
    x: float
    y: float
    z: float

    @property
    def xy(self):
        return np.array([self.x, self.y])

    @property
    def xyz(self):
        return np.array([self.x, self.y, self.z])


@dataclass(frozen=True, eq=False)
class Polygon2D:
    """Ordered vertex list in meters; ``arc_segments`` keeps curved-wall
    metadata from imported layouts (already discretized into ``vertices``)."""

    vertices: np.ndarray
    arc_segments: tuple = field(default=())

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 2)
        if len(v) < 3:
            raise NonSimplePolygon("polygon needs at least 3 vertices")
        object.__setattr__(self, "vertices", v)

    def __eq__(self, other):
        return isinstance(other, Polygon2D) and np.array_equal(self.vertices, other.vertices)

    def __len__(self):
        return len(self.vertices)

    @property
    def signed_area(self) -> float:
        x, y = self.vertices[:, 0], self.vertices[:, 1]
        return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))

    @property
    def area(self) -> float:
        return abs(self.signed_area)

    @property
    def centroid(self) -> np.ndarray:
        v = self.vertices
        w = np.roll(v, -1, axis=0)
        cross = v[:, 0] * w[:, 1] - w[:, 0] * v[:, 1]
        a = cross.sum() / 2.0
        cx = ((v[:, 0] + w[:, 0]) * cross).sum() / (6.0 * a)
        cy = ((v[:, 1] + w[:, 1]) * cross).sum() / (6.0 * a)
        return np.array([cx, cy])

    def edges(self):
        """(K, 2, 2) array of wall segments, edge k runs v_k -> v_{k+1}."""
        v = self.vertices
        return np.stack([v, np.roll(v, -1, axis=0)], axis=1)

    def ccw(self) -> "Polygon2D":
        if self.signed_area >= 0:
            return self
        return Polygon2D(self.vertices[::-1].copy(), self.arc_segments)

    def is_convex(self) -> bool:
        v = self.vertices
        e = np.roll(v, -1, axis=0) - v
        cross = e[:, 0] * np.roll(e[:, 1], -1) - e[:, 1] * np.roll(e[:, 0], -1)
        return bool(np.all(cross >= -1e-12) or np.all(cross <= 1e-12))

    def is_simple(self) -> bool:
        return is_simple(self.vertices)

    def contains(self, points) -> np.ndarray:
        return points_in_polygon(points, self.vertices)

    def translate(self, offset) -> "Polygon2D":
        return Polygon2D(self.vertices + np.asarray(offset, dtype=np.float64), self.arc_segments)


# ---------------------------------------------------------------------------
# low-level predicates


def _orient(a, b, c):
    return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])


def _on_segment(a, b, p):
    return (min(a[0], b[0]) - 1e-12 <= p[0] <= max(a[0], b[0]) + 1e-12
            and min(a[1], b[1]) - 1e-12 <= p[1] <= max(a[1], b[1]) + 1e-12)


def segments_intersect(p1, p2, q1, q2) -> bool:
    """True if closed segments p1p2 and q1q2 share at least one point."""
    d1 = _orient(q1, q2, p1)
    d2 = _orient(q1, q2, p2)
    d3 = _orient(p1, p2, q1)
    d4 = _orient(p1, p2, q2)
    if ((d1 > 0 and d2 < 0) or (d1 < 0 and d2 > 0)) and ((d3 > 0 and d4 < 0) or (d3 < 0 and d4 > 0)):
        return True
    if d1 == 0 and _on_segment(q1, q2, p1):
        return True
    if d2 == 0 and _on_segment(q1, q2, p2):
        return True
    if d3 == 0 and _on_segment(p1, p2, q1):
        return True
    if d4 == 0 and _on_segment(p1, p2, q2):
        return True
    return False


def is_simple(vertices, min_angle=1e-6) -> bool:
    """O(n^2) check: no crossing or touching non-adjacent walls, no
    zero-length walls, no zero interior angles (spikes)."""
    v = np.asarray(vertices, dtype=np.float64)
    n = len(v)
    if n < 3:
        return False
    nxt = np.roll(v, -1, axis=0)
    lengths = np.hypot(*(nxt - v).T)
    if np.any(lengths < 1e-9):
        return False
    prv = np.roll(v, 1, axis=0)
    a = prv - v
    b = nxt - v
    ang = np.arctan2(np.abs(a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]), (a * b).sum(axis=1))
    if np.any(ang < min_angle):
        return False
    for i in range(n):
        for j in range(i + 1, n):
            if j == i + 1 or (i == 0 and j == n - 1):
                continue
            if segments_intersect(v[i], nxt[i], v[j], nxt[j]):
                return False
    return abs(Polygon2D(v).signed_area) > 1e-9


def points_in_polygon(points, vertices) -> np.ndarray:
    """Vectorized even-odd crossing test; ``points`` is (..., 2)."""
    pts = np.asarray(points, dtype=np.float64)
    shape = pts.shape[:-1]
    px = pts[..., 0].ravel()
    py = pts[..., 1].ravel()
    v = np.asarray(vertices, dtype=np.float64)
    inside = np.zeros(px.shape, dtype=bool)
    x0, y0 = v[:, 0], v[:, 1]
    x1, y1 = np.roll(x0, -1), np.roll(y0, -1)
    for a, b, c, d in zip(x0, y0, x1, y1):
        crosses = (b > py) != (d > py)
        with np.errstate(divide="ignore", invalid="ignore"):
            xi = a + (py - b) * (c - a) / (d - b)
        inside ^= crosses & (px < xi)
    return inside.reshape(shape)


def distance_to_segments(point, edges) -> np.ndarray:
    p = np.asarray(point, dtype=np.float64)
    a = edges[:, 0]
    d = edges[:, 1] - a
    t = np.clip(((p - a) * d).sum(axis=1) / np.maximum((d * d).sum(axis=1), _EPS), 0.0, 1.0)
    closest = a + t[:, None] * d
    return np.hypot(*(p - closest).T)


def ray_hits(origin, direction, edges):
    """Distance along the ray to each wall (inf where missed)."""
    o = np.asarray(origin, dtype=np.float64)
    r = np.asarray(direction, dtype=np.float64)
    a = edges[:, 0]
    s = edges[:, 1] - a
    denom = r[0] * s[:, 1] - r[1] * s[:, 0]
    ao = a - o
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (ao[:, 0] * s[:, 1] - ao[:, 1] * s[:, 0]) / denom
        u = (ao[:, 0] * r[1] - ao[:, 1] * r[0]) / denom
    ok = (np.abs(denom) > _EPS) & (t > 1e-12) & (u >= 0.0) & (u <= 1.0)
    return np.where(ok, t, np.inf)


# ---------------------------------------------------------------------------
# standard room families


def make_shoebox_vertices(s: SizeParams) -> Polygon2D:
    l, w = s.s_l, s.s_w
    return Polygon2D([(-l, -w), (-l, w), (l, w), (l, -w)])


def make_regular_polygon_vertices(K: int, s: SizeParams) -> Polygon2D:
    # Second coordinate uses sine; a cosine there would put every vertex on one line.
    if K not in (5, 6):
        raise ValueError(f"K must be 5 or 6, got {K}")
    k = np.arange(1, K + 1)
    ang = 2.0 * np.pi * k / K
    return Polygon2D(np.column_stack([s.s_l * np.cos(ang), s.s_w * np.sin(ang)]))


def make_L_vertices(s: SizeParams, mu_l: float, mu_w: float) -> Polygon2D:
    """Shoebox with the (+s_l, +s_w) corner cut out by ``mu_l`` x ``mu_w``."""
    l, w = s.s_l, s.s_w
    if not (0.0 <= mu_l <= 0.5 * l and 0.0 <= mu_w <= 0.5 * w):
        raise ValueError("cutout outside [0, 0.5 s]")
    if mu_l == 0.0 or mu_w == 0.0:
        return make_shoebox_vertices(s)
    return Polygon2D([
        (-l, -w), (-l, w), (l - mu_l, w), (l - mu_l, w - mu_w), (l, w - mu_w), (l, -w),
    ])


def make_T_vertices(s: SizeParams, mu_l1: float, mu_l2: float, mu_w: float) -> Polygon2D:
    """Shoebox with two notches cut from the -y edge.

    The left notch spans x in [-s_l, mu_l1], the right one x in [mu_l2, s_l];
    both run from y = -s_w up to y = mu_w, leaving a stem between them.
    """
    l, w = s.s_l, s.s_w
    if not (-0.75 * l <= mu_l1 <= -0.25 * l and 0.25 * l <= mu_l2 <= 0.75 * l
            and -0.5 * w <= mu_w <= 0.0):
        raise ValueError("T parameters outside their ranges")
    return Polygon2D([
        (mu_l1, -w), (mu_l1, mu_w), (-l, mu_w), (-l, w),
        (l, w), (l, mu_w), (mu_l2, mu_w), (mu_l2, -w),
    ])


def crumple(p: Polygon2D, rng, max_shift: float = MAX_SHIFT, retries: int = CRUMPLE_RETRIES) -> Polygon2D:
    rng = np.random.default_rng(rng)
    if max_shift == 0:
        return p
    for _ in range(retries):
        shifted = p.vertices + rng.uniform(-max_shift, max_shift, size=p.vertices.shape)
        if is_simple(shifted):
            return Polygon2D(shifted)
    raise CrumpleFailed(f"no simple polygon after {retries} crumples")


def rotate(p: Polygon2D, theta: float) -> Polygon2D:
    c, s = math.cos(theta), math.sin(theta)
    rot = np.array([[c, -s], [s, c]])
    return Polygon2D(p.vertices @ rot.T, p.arc_segments)


def place_device(p: Polygon2D, s_h: float, rng, scale: float = PLACEMENT_SCALE,
                 retries: int = PLACEMENT_RETRIES, clearance: float = MIN_WALL_CLEARANCE) -> DevicePose:
    """Uniform (x, y) in the polygon shrunk by ``scale`` about its centroid,
    rejected unless it also lies inside ``p`` clear of every wall."""
    rng = np.random.default_rng(rng)
    c = p.centroid
    shrunk = c + scale * (p.vertices - c)
    lo, hi = shrunk.min(axis=0), shrunk.max(axis=0)
    edges = p.edges()
    for _ in range(retries):
        xy = rng.uniform(lo, hi)
        if not points_in_polygon(xy, shrunk) or not points_in_polygon(xy, p.vertices):
            continue
        if distance_to_segments(xy, edges).min() <= clearance:
            continue
        z = rng.uniform(*DEVICE_Z_RANGE)
        if z >= s_h:
            raise PlacementFailed("room lower than device height range")
        return DevicePose(float(xy[0]), float(xy[1]), float(z))
    raise PlacementFailed(f"no interior device position after {retries} draws")


def visible_walls(p: Polygon2D, device_xy) -> np.ndarray:
    """Boolean per wall: is some point of the wall directly visible.

    Each wall's angular interval, as seen from the device, is split at every
    polygon vertex direction. Inside one piece the depth order of walls along a
    ray cannot change, so one ray through each piece's middle decides it.
    """
    o = np.asarray(device_xy, dtype=np.float64)
    edges = p.edges()
    rel = p.vertices - o
    vert_ang = np.arctan2(rel[:, 1], rel[:, 0])
    n = len(edges)
    out = np.zeros(n, dtype=bool)
    for i in range(n):
        a0 = vert_ang[i]
        a1 = vert_ang[(i + 1) % n]
        sweep = (a1 - a0 + np.pi) % (2 * np.pi) - np.pi
        rel_ang = (vert_ang - a0) * np.sign(sweep)
        rel_ang = rel_ang % (2 * np.pi)
        inner = np.sort(rel_ang[(rel_ang > 1e-12) & (rel_ang < abs(sweep) - 1e-12)])
        cuts = np.concatenate([[0.0], inner, [abs(sweep)]])
        for lo, hi in zip(cuts[:-1], cuts[1:]):
            if hi - lo <= 1e-12:
                continue
            ang = a0 + np.sign(sweep) * 0.5 * (lo + hi)
            t = ray_hits(o, (math.cos(ang), math.sin(ang)), edges)
            if np.isfinite(t[i]) and np.argmin(t) == i:
                out[i] = True
                break
    return out


def classify_los(p: Polygon2D, device_xy) -> str:
    if not points_in_polygon(np.asarray(device_xy, dtype=np.float64), p.vertices):
        raise DeviceOutsidePolygon(f"device {tuple(device_xy)} outside room")
    return "LOS" if visible_walls(p, device_xy).all() else "NLOS"


# ---------------------------------------------------------------------------
# room records


@dataclass(frozen=True, eq=False)
class RoomSpec:
    polygon: Polygon2D
    height: float
    materials: MaterialAssignment
    device: DevicePose
    family: str
    los_label: str
    seed: int = -1

    def __eq__(self, other):
        return isinstance(other, RoomSpec) and self.to_json() == other.to_json()

    def to_dict(self):
        return {
            "family": self.family,
            "seed": self.seed,
            "vertices": self.polygon.vertices.tolist(),
            "height": self.height,
            "device": [self.device.x, self.device.y, self.device.z],
            "materials": self.materials.to_dict(),
            "los_label": self.los_label,
        }

    def to_json(self) -> str:
        # repr-exact floats so equal JSON means bit-identical rooms
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d):
        return cls(
            polygon=Polygon2D(d["vertices"]),
            height=float(d["height"]),
            materials=MaterialAssignment.from_dict(d["materials"]),
            device=DevicePose(*map(float, d["device"])),
            family=d["family"],
            los_label=d["los_label"],
            seed=int(d.get("seed", -1)),
        )


def _prototype(family, rng, s):
    if family == "shoebox":
        return make_shoebox_vertices(s)
    if family == "pentagonal":
        return make_regular_polygon_vertices(5, s)
    if family == "hexagonal":
        return make_regular_polygon_vertices(6, s)
    if family == "L":
        return make_L_vertices(s, rng.uniform(0, 0.5 * s.s_l), rng.uniform(0, 0.5 * s.s_w))
    if family == "T":
        return make_T_vertices(
            s,
            rng.uniform(-0.75 * s.s_l, -0.25 * s.s_l),
            rng.uniform(0.25 * s.s_l, 0.75 * s.s_l),
            rng.uniform(-0.5 * s.s_w, 0.0),
        )
    raise ValueError(f"unknown room family {family!r}")


def sample_standard_room(family: str, rng) -> RoomSpec:
    """Draw a random room of ``family``; ``rng`` is an int seed or a Generator.

    Raises RoomRegenerate when crumpling or device placement gives up.
    """
    seed = int(rng) if isinstance(rng, (int, np.integer)) else -1
    rng = np.random.default_rng(rng)
    s = SizeParams(rng.uniform(*SIZE_RANGE_LW), rng.uniform(*SIZE_RANGE_LW), rng.uniform(*SIZE_RANGE_H))
    poly = _prototype(family, rng, s)
    try:
        poly = crumple(poly, rng)
        poly = rotate(poly, rng.uniform(0.0, 2.0 * np.pi)).ccw()
        device = place_device(poly, s.s_h, rng)
    except (CrumpleFailed, PlacementFailed) as exc:
        raise RoomRegenerate(str(exc)) from exc
    los = classify_los(poly, device.xy)
    materials = assign_materials(rng)
    return RoomSpec(poly, float(s.s_h), materials, device, family, los, seed)


# ---------------------------------------------------------------------------
# layout import


def discretize_arc(start, center, radius, sweep, tol=ARC_CHORD_TOL) -> np.ndarray:
    """Points along an arc (excluding the start point) such that every chord
    stays within ``tol`` of the circle (sagitta bound)."""
    start = np.asarray(start, dtype=np.float64)
    center = np.asarray(center, dtype=np.float64)
    if tol >= radius:
        n = max(1, math.ceil(abs(sweep) / (math.pi / 2)))
    else:
        max_step = 2.0 * math.acos(1.0 - tol / radius)
        n = max(1, math.ceil(abs(sweep) / max_step))
    a0 = math.atan2(start[1] - center[1], start[0] - center[0])
    angs = a0 + sweep * np.arange(1, n + 1) / n
    return center + radius * np.column_stack([np.cos(angs), np.sin(angs)])


def layout_from_dict(d, rng=0) -> RoomSpec:
    try:
        verts = [tuple(map(float, v)) for v in d["vertices"]]
        height = float(d["height"])
        arcs = list(d.get("arcs") or [])
        device = d.get("device")
        arc_meta = []
        for a in arcs:
            arc_meta.append((int(a["start"]), tuple(map(float, a["center"])), float(a["radius"]),
                             float(a["sweep"])))
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed layout: {exc}") from exc
    if len(verts) < 3 or any(len(v) != 2 for v in verts):
        raise ParseError("layout needs at least 3 two-dimensional vertices")
    by_start = {}
    for start, center, radius, sweep in arc_meta:
        if not 0 <= start < len(verts) or radius <= 0:
            raise ParseError(f"bad arc starting at vertex {start}")
        by_start[start] = (center, radius, sweep)
    pts = []
    for i, v in enumerate(verts):
        pts.append(v)
        if i in by_start:
            center, radius, sweep = by_start[i]
            arc = discretize_arc(v, center, radius, sweep)
            # the last arc point coincides with the next vertex
            pts.extend(map(tuple, arc[:-1]))
    if not is_simple(pts):
        raise NonSimplePolygon("imported layout is not a simple polygon")
    poly = Polygon2D(pts, tuple(arc_meta)).ccw()
    rng = np.random.default_rng(rng)
    if device is None:
        pose = place_device(poly, height, rng)
    else:
        try:
            pose = DevicePose(*map(float, device))
        except (TypeError, ValueError) as exc:
            raise ParseError(f"bad device pose: {exc}") from exc
    los = classify_los(poly, pose.xy)
    return RoomSpec(poly, height, assign_materials(rng), pose, "imported", los)


def import_layout(path, rng=0) -> RoomSpec:
    try:
        with open(path) as fh:
            d = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    if not isinstance(d, dict):
        raise ParseError(f"{path}: top level must be an object")
    return layout_from_dict(d, rng)
