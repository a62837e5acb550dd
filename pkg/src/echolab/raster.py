"""Device-centred ground-truth rasters: floorplan image, height vector, voxels.

Image convention: ``pixels[iy, ix]``; pixel centre of column ``ix`` sits at
``(ix + 0.5 - b/2) * pixel_size`` meters from the device along x, likewise
rows along y. The device therefore falls in pixel ``(b/2, b/2)``.
"""
from dataclasses import dataclass

import numpy as np

from echolab.errors import HeightExceedsCanvas, RoomExceedsCanvas
from echolab.geometry import RoomSpec, points_in_polygon

DEFAULT_B = 100
DEFAULT_H = 40
DEFAULT_PIXEL = 0.2


@dataclass(frozen=True, eq=False)
class FloorplanImage:
    pixels: np.ndarray
    pixel_size: float = DEFAULT_PIXEL

    @property
    def b(self) -> int:
        return self.pixels.shape[0]


@dataclass(frozen=True, eq=False)
class HeightVector:
    pixels: np.ndarray
    pixel_size: float = DEFAULT_PIXEL

    @property
    def h(self) -> int:
        return self.pixels.shape[0]


@dataclass(frozen=True, eq=False)
class VoxelGrid:
    voxels: np.ndarray


def pixel_centers(n: int, pixel_size: float) -> np.ndarray:
    return (np.arange(n) + 0.5 - n / 2.0) * pixel_size


def rasterize_floorplan(spec: RoomSpec, b: int = DEFAULT_B, pixel_size: float = DEFAULT_PIXEL,
                        clip: bool = False) -> FloorplanImage:
    """Centre-point membership raster of the room cross-section.

    Raises RoomExceedsCanvas when a wall vertex lies beyond the canvas,
    unless ``clip`` is set, in which case the outside part is simply cut off.
    """
    rel = spec.polygon.vertices - spec.device.xy
    half = b * pixel_size / 2.0
    if not clip and np.abs(rel).max() > half:
        raise RoomExceedsCanvas(f"room reaches {np.abs(rel).max():.2f} m, canvas half-span {half:.2f} m")
    c = pixel_centers(b, pixel_size)
    gx, gy = np.meshgrid(c, c)
    inside = points_in_polygon(np.stack([gx, gy], axis=-1), rel)
    return FloorplanImage(inside.astype(np.uint8), pixel_size)


def rasterize_height(spec: RoomSpec, h: int = DEFAULT_H, pixel_size: float = DEFAULT_PIXEL) -> HeightVector:
    """Pixel k is interior iff its centre lies in [-z, height - z] about the device."""
    z = spec.device.z
    half = h * pixel_size / 2.0
    if spec.height >= h * pixel_size or z > half or spec.height - z > half:
        raise HeightExceedsCanvas(f"height {spec.height:.2f} m (device z {z:.2f}) exceeds {h} px canvas")
    c = pixel_centers(h, pixel_size)
    return HeightVector(((c >= -z) & (c <= spec.height - z)).astype(np.uint8), pixel_size)


def extrude_3d(fp, hv) -> VoxelGrid:
    f = fp.pixels if isinstance(fp, FloorplanImage) else np.asarray(fp)
    v = hv.pixels if isinstance(hv, HeightVector) else np.asarray(hv)
    if f.ndim != 2 or f.shape[0] != f.shape[1] or v.ndim != 1:
        raise ValueError(f"expected (b, b) and (h,), got {f.shape} and {v.shape}")
    return VoxelGrid((f[:, :, None].astype(bool) & v[None, None, :].astype(bool)).astype(np.uint8))
