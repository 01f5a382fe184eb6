"""Panorama-to-map projection used to label slice scene positions.

World frame is local east-north-up in metres with the camera's ground
position at the reference image center.  Panorama azimuth ``phi`` is a
compass angle (0 = north, clockwise) and ``omega`` is the zenith angle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from .errors import InvalidConfig, InvalidDepth, OutOfRange
from .geometry import ImagePoint

INVALID_DEPTH_M = 255.0


@dataclass(frozen=True)
class DepthPanorama:
    """Equirectangular depth in metres, array shape ``(H, W)``."""

    depth: np.ndarray = field(repr=False)
    invalid_threshold: float = INVALID_DEPTH_M

    def __post_init__(self):
        d = np.asarray(self.depth, dtype=float)
        if d.ndim != 2:
            raise InvalidConfig("depth grid must be 2-D")
        if np.any(d < 0):
            raise InvalidDepth("negative depth")
        d.setflags(write=False)
        object.__setattr__(self, "depth", d)

    @property
    def width(self) -> int:
        return self.depth.shape[1]

    @property
    def height(self) -> int:
        return self.depth.shape[0]

    @property
    def valid(self) -> np.ndarray:
        return self.depth < self.invalid_threshold


@dataclass(frozen=True)
class GeoTransform:
    """Affine map from local metres to reference-image pixels.

    ``origin_east``/``origin_north`` is the camera ground position, which
    lands on the image center.
    """

    width: int
    height: int
    meters_per_pixel: float
    origin_east: float = 0.0
    origin_north: float = 0.0

    def __post_init__(self):
        if self.meters_per_pixel <= 0:
            raise InvalidConfig("meters_per_pixel must be positive")


@dataclass(frozen=True)
class SlicePlan:
    n: int = 12
    hfov_deg: float = 90.0
    vfov_deg: float = 90.0
    vfov_center: float = 0.75 * math.pi
    size: int = 512

    def __post_init__(self):
        if self.n < 1:
            raise InvalidConfig("n must be positive")
        if not (0 < self.hfov_deg < 180 and 0 < self.vfov_deg < 180):
            raise InvalidConfig("slice fields of view must be in (0, 180)")
        if self.size < 1:
            raise InvalidConfig("size must be positive")

    def hfov_center(self, slice_index: int) -> float:
        """Azimuth of a slice's optical axis, radians; slice 0 looks north."""
        self._check_index(slice_index)
        return 2.0 * math.pi * slice_index / self.n

    @property
    def centers(self) -> np.ndarray:
        return 2.0 * math.pi * np.arange(self.n) / self.n

    def _check_index(self, slice_index: int):
        if not 0 <= slice_index < self.n:
            raise OutOfRange(f"slice_index {slice_index} outside [0, {self.n})")


def panoramic_angles(x, y, W: int, H: int) -> Tuple[float, float]:
    """Azimuth and zenith (radians) of panorama pixel ``(x, y)``."""
    if not (0 <= x < W and 0 <= y < H):
        raise OutOfRange(f"pixel ({x}, {y}) outside {W}x{H}")
    return 2.0 * math.pi * x / W, math.pi * y / H


def _offsets(phi, omega, depth):
    s = np.sin(omega)
    return np.stack([depth * s * np.sin(phi), depth * s * np.cos(phi), depth * np.cos(omega)], axis=-1)


def pixel_to_world(x, y, depth: float, camera_world, W: int, H: int,
                   invalid_threshold: float = INVALID_DEPTH_M) -> Tuple[float, float, float]:
    """Back-project a panorama pixel with known depth to world (E, N, U) metres."""
    if not 0 <= depth < invalid_threshold:
        raise InvalidDepth(f"depth {depth} is not valid")
    phi, omega = panoramic_angles(x, y, W, H)
    off = _offsets(phi, omega, depth)
    return tuple(float(c + o) for c, o in zip(camera_world, off))


def world_to_reference(X, Y, g: GeoTransform):
    """World east/north metres to reference pixels; works on arrays."""
    xs = g.width / 2.0 + (np.asarray(X, dtype=float) - g.origin_east) / g.meters_per_pixel
    ys = g.height / 2.0 - (np.asarray(Y, dtype=float) - g.origin_north) / g.meters_per_pixel
    if xs.ndim == 0:
        return float(xs), float(ys)
    return xs, ys


def slice_window(plan: SlicePlan, slice_index: int, W: int, H: int) -> np.ndarray:
    """Boolean ``(H, W)`` mask of panorama pixels inside a slice's angular window.

    Azimuth is half-open, ``[c - hfov/2, c + hfov/2)``, so neighbouring
    windows tile the circle without double counting; zenith is closed.
    Bounds are compared in pixel units, which keeps them exact whenever the
    panorama width is a multiple of the slice count.
    """
    plan._check_index(slice_index)
    center = W * slice_index / plan.n
    half_w = W * plan.hfov_deg / 720.0
    d = np.mod(np.arange(W) - center + W / 2.0, W) - W / 2.0
    cols = (d >= -half_w) & (d < half_w)
    row_c = plan.vfov_center * H / math.pi
    half_h = H * plan.vfov_deg / 360.0
    rows = np.abs(np.arange(H) - row_c) <= half_h + 1e-9
    return rows[:, None] & cols[None, :]


def scene_centroid(plan: SlicePlan, slice_index: int, pano: DepthPanorama,
                   camera_world, g: GeoTransform) -> Optional[ImagePoint]:
    """Mean reference-map position of a slice's valid-depth pixels.

    Returns ``None`` when the slice window has no valid depth (e.g. sky).
    """
    H, W = pano.depth.shape
    mask = slice_window(plan, slice_index, W, H) & pano.valid
    if not mask.any():
        return None
    rows, cols = np.nonzero(mask)
    phi = 2.0 * math.pi * cols / W
    omega = math.pi * rows / H
    off = _offsets(phi, omega, pano.depth[rows, cols])
    xs, ys = world_to_reference(camera_world[0] + off[:, 0], camera_world[1] + off[:, 1], g)
    return ImagePoint(float(xs.mean()), float(ys.mean()))


def slice_rays(plan: SlicePlan, slice_index: int) -> np.ndarray:
    """Unit world directions (E, N, U) for every slice pixel, shape ``(S, S, 3)``.

    Pixel ``(u, v)`` sits at offset ``(u - S/2, v - S/2)`` from the
    principal point, so pixel ``(S/2, S/2)`` is the optical axis and column
    0 is the left edge of the field of view.
    """
    S = plan.size
    fx = (S / 2.0) / math.tan(math.radians(plan.hfov_deg) / 2.0)
    fy = (S / 2.0) / math.tan(math.radians(plan.vfov_deg) / 2.0)
    c = plan.hfov_center(slice_index)
    w = plan.vfov_center
    forward = np.array([math.sin(w) * math.sin(c), math.sin(w) * math.cos(c), math.cos(w)])
    right = np.array([math.cos(c), -math.sin(c), 0.0])
    down = np.array([math.cos(w) * math.sin(c), math.cos(w) * math.cos(c), -math.sin(w)])
    grid = np.arange(S) - S / 2.0
    xn = grid[None, :, None] / fx
    yn = grid[:, None, None] / fy
    rays = forward + xn * right + yn * down
    return rays / np.linalg.norm(rays, axis=-1, keepdims=True)


def equirect_to_pinhole_map(plan: SlicePlan, slice_index: int, W: int, H: int):
    """Source panorama coordinates for each pixel of a pinhole slice.

    Returns ``(map_x, map_y)``, each ``(S, S)`` float arrays of fractional
    panorama pixels, ready for a remap routine.  No interpolation is done
    here.
    """
    rays = slice_rays(plan, slice_index)
    phi = np.mod(np.arctan2(rays[..., 0], rays[..., 1]), 2.0 * math.pi)
    omega = np.arccos(np.clip(rays[..., 2], -1.0, 1.0))
    return phi * W / (2.0 * math.pi), omega * H / math.pi
