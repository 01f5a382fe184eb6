"""Planar geometry on the reference map.

Conventions
-----------
Image coordinates are pixels with x pointing east and y pointing south
(image rows downward).  Compass bearings are degrees, 0 = north, increasing
clockwise, so bearing ``b`` maps to the unit vector ``(sin b, -cos b)``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from itertools import combinations
from typing import NamedTuple, Optional, Sequence

import numpy as np
from scipy import optimize

from .errors import DegenerateGeometry, InvalidConfig, UndefinedMean

COINCIDENT_TOL = 1e-9  # px
ZERO_ANGLE_TOL = 1e-9  # deg; smaller errors are rounding noise of an exact fit
PARALLEL_TOL = 1e-9  # |cross| of unit directions
REFINE_TOL_DEG = 1e-8
REFINE_MAX_ITER = 50
DEFAULT_HFOV_DEG = 90.0


class ImagePoint(NamedTuple):
    x: float
    y: float


def normalize_bearing(deg: float) -> float:
    """Wrap a bearing into ``[0, 360)``."""
    b = math.fmod(float(deg), 360.0)
    if b < 0.0:
        b += 360.0
    # fmod of a tiny negative can round up to exactly 360
    return 0.0 if b >= 360.0 else b


def circular_difference(a, b):
    """Absolute angular difference in degrees, in ``[0, 180]``.

    Works elementwise on arrays.
    """
    d = np.abs(np.mod(np.asarray(a, dtype=float) - np.asarray(b, dtype=float), 360.0))
    d = np.minimum(d, 360.0 - d)
    return float(d) if d.ndim == 0 else d


@dataclass(frozen=True)
class SlicePose:
    """One slice observation.

    ``bearing`` is the compass direction from the scene location to the
    camera; ``hfov_center`` is the slicing angle of the slice in radians.
    """

    slice_index: int
    x: float
    y: float
    bearing: float
    hfov_center: float

    def __post_init__(self):
        object.__setattr__(self, "bearing", normalize_bearing(self.bearing))

    @classmethod
    def for_slice(cls, slice_index: int, n: int, x: float, y: float, bearing: float) -> "SlicePose":
        if not 0 <= slice_index < n:
            raise InvalidConfig(f"slice_index {slice_index} outside [0, {n})")
        return cls(slice_index, float(x), float(y), bearing, 2.0 * math.pi * slice_index / n)

    @property
    def location(self) -> ImagePoint:
        return ImagePoint(self.x, self.y)


@dataclass(frozen=True)
class CameraPose:
    x: float
    y: float
    heading: float

    def __post_init__(self):
        object.__setattr__(self, "heading", normalize_bearing(self.heading))

    @property
    def location(self) -> ImagePoint:
        return ImagePoint(self.x, self.y)


class ErrorMode(enum.Enum):
    """Which expected ray the geometric error is measured against.

    ``PER_SLICE_BEARING`` uses each slice's own scene-to-camera bearing
    reversed; ``GLOBAL_HEADING`` uses a camera heading plus the slice's
    HFoV center.
    """

    PER_SLICE_BEARING = "per_slice_bearing"
    GLOBAL_HEADING = "global_heading"


@dataclass(frozen=True)
class AnnularSector:
    origin: ImagePoint
    inner_radius: float
    outer_radius: float
    axis: float
    half_angle: float

    def __post_init__(self):
        if not 0.0 <= self.inner_radius < self.outer_radius:
            raise InvalidConfig(
                f"need 0 <= d1 < d2, got d1={self.inner_radius}, d2={self.outer_radius}"
            )
        if not 0.0 < self.half_angle <= 180.0:
            raise InvalidConfig(f"half_angle must be in (0, 180], got {self.half_angle}")
        object.__setattr__(self, "origin", ImagePoint(*map(float, self.origin)))
        object.__setattr__(self, "axis", normalize_bearing(self.axis))


def bearing_to_vector(b):
    """Unit vector in image coordinates for compass bearing(s) ``b`` (degrees).

    Scalar input gives shape ``(2,)``; array input of shape ``S`` gives
    ``S + (2,)``.
    """
    r = np.radians(np.asarray(b, dtype=float))
    return np.stack([np.sin(r), -np.cos(r)], axis=-1)


def vector_to_bearing(v):
    """Compass bearing (degrees, ``[0, 360)``) of image-space vector(s)."""
    v = np.asarray(v, dtype=float)
    deg = np.degrees(np.arctan2(v[..., 0], -v[..., 1]))
    deg = np.mod(deg, 360.0)
    deg = np.where(deg >= 360.0, 0.0, deg)
    return float(deg) if deg.ndim == 0 else deg


def pose_arrays(poses: Sequence[SlicePose]):
    """Stack poses into ``(xy, bearing_deg, hfov_center_rad)`` arrays."""
    xy = np.array([[p.x, p.y] for p in poses], dtype=float).reshape(-1, 2)
    bearings = np.array([p.bearing for p in poses], dtype=float)
    centers = np.array([p.hfov_center for p in poses], dtype=float)
    return xy, bearings, centers


def expected_bearings(
    poses: Sequence[SlicePose],
    mode: ErrorMode = ErrorMode.PER_SLICE_BEARING,
    heading: Optional[float] = None,
) -> np.ndarray:
    """Expected camera-to-scene bearing of every pose, in degrees."""
    mode = ErrorMode(mode)
    _, bearings, centers = pose_arrays(poses)
    if mode is ErrorMode.PER_SLICE_BEARING:
        return np.mod(bearings + 180.0, 360.0)
    if heading is None:
        raise InvalidConfig("GLOBAL_HEADING mode needs a heading")
    return np.mod(heading + np.degrees(centers), 360.0)


def angles_between(camera_xy, xy, expected_deg) -> np.ndarray:
    """Angle (degrees) between camera->scene vectors and expected rays.

    ``camera_xy`` has shape ``(..., 2)`` and broadcasts against ``xy`` of
    shape ``(n, 2)``; e.g. cameras of shape ``(m, 1, 2)`` give ``(m, n)``.
    """
    u = np.asarray(xy, dtype=float) - np.asarray(camera_xy, dtype=float)
    if np.any(np.hypot(u[..., 0], u[..., 1]) <= COINCIDENT_TOL):
        raise DegenerateGeometry("camera location coincides with a scene location")
    e = bearing_to_vector(expected_deg)
    cross = e[..., 0] * u[..., 1] - e[..., 1] * u[..., 0]
    dot = e[..., 0] * u[..., 0] + e[..., 1] * u[..., 1]
    theta = np.degrees(np.arctan2(np.abs(cross), dot))
    return np.where(theta < ZERO_ANGLE_TOL, 0.0, theta)


def geometric_error(
    camera_location,
    pose: SlicePose,
    mode: ErrorMode = ErrorMode.PER_SLICE_BEARING,
    heading: Optional[float] = None,
) -> float:
    """Angle between the camera->scene vector and the slice's expected ray.

    Parameters
    ----------
    camera_location : (x, y)
        Candidate camera position in reference-map pixels.
    pose : SlicePose
    mode : ErrorMode
        ``PER_SLICE_BEARING`` (default) expects the ray
        ``pose.bearing + 180``; ``GLOBAL_HEADING`` expects
        ``heading + degrees(pose.hfov_center)``.
    heading : float, optional
        Camera heading in degrees, required for ``GLOBAL_HEADING``.

    Returns
    -------
    float
        Error in degrees, in ``[0, 180]``.

    Raises
    ------
    DegenerateGeometry
        If the camera coincides with the pose location.
    """
    expected = expected_bearings([pose], mode, heading)
    return float(angles_between(camera_location, [[pose.x, pose.y]], expected)[0])


def _cross(a, b):
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


def intersect_rays(xy_a, dir_a, xy_b, dir_b):
    """Vectorised forward intersection of rays ``xy + s * dir``.

    Returns ``(points, ok)``; ``ok`` is False where the rays are parallel
    or meet behind either origin.
    """
    xy_a, dir_a, xy_b, dir_b = (np.asarray(a, dtype=float) for a in (xy_a, dir_a, xy_b, dir_b))
    denom = _cross(dir_a, dir_b)
    parallel = np.abs(denom) < PARALLEL_TOL
    safe = np.where(parallel, 1.0, denom)
    w = xy_b - xy_a
    s = _cross(w, dir_b) / safe
    t = _cross(w, dir_a) / safe
    ok = ~parallel & (s > 0.0) & (t > 0.0)
    points = xy_a + s[..., None] * dir_a
    return points, ok


def ray_intersection(a: SlicePose, b: SlicePose) -> Optional[ImagePoint]:
    """Point where the scene->camera rays of two poses meet, if in front of both."""
    pts, ok = intersect_rays(
        [a.x, a.y], bearing_to_vector(a.bearing), [b.x, b.y], bearing_to_vector(b.bearing)
    )
    if not bool(ok):
        return None
    return ImagePoint(float(pts[0]), float(pts[1]))


def _wrap_pi(a):
    return (a + np.pi) % (2.0 * np.pi) - np.pi


class _AngularObjective:
    """Sum of per-slice errors and its signed-residual linearisation."""

    def __init__(self, xy: np.ndarray, expected_deg: np.ndarray):
        self.xy = xy
        e = bearing_to_vector(expected_deg)
        self.expected_angle = np.arctan2(e[:, 1], e[:, 0])
        self._items = list(zip(xy[:, 0].tolist(), xy[:, 1].tolist(), self.expected_angle.tolist()))

    def residuals(self, p):
        d = self.xy - p
        dist2 = d[:, 0] ** 2 + d[:, 1] ** 2
        r = _wrap_pi(np.arctan2(d[:, 1], d[:, 0]) - self.expected_angle)
        jac = np.stack([d[:, 1], -d[:, 0]], axis=1) / dist2[:, None]
        return r, jac, dist2

    def __call__(self, p) -> float:
        # plain floats: for a dozen poses this beats numpy's call overhead
        px, py = float(p[0]), float(p[1])
        total = 0.0
        for x, y, e in self._items:
            dx, dy = x - px, y - py
            if dx * dx + dy * dy <= COINCIDENT_TOL**2:
                return math.inf
            total += abs(math.remainder(math.atan2(dy, dx) - e, 2.0 * math.pi))
        return math.degrees(total)


def _irls(obj: _AngularObjective, p0: np.ndarray):
    """Reweighted Gauss-Newton descent on the sum of absolute angles."""
    best_p, best_f = p0, obj(p0)
    for _ in range(REFINE_MAX_ITER):
        if not math.isfinite(best_f):
            break
        r, jac, _ = obj.residuals(best_p)
        w = 1.0 / np.maximum(np.abs(r), 1e-9)
        h = jac.T @ (w[:, None] * jac)
        g = jac.T @ (w * r)
        try:
            step = -np.linalg.solve(h, g)
        except np.linalg.LinAlgError:
            break
        improved = False
        lam = 1.0
        for _ in range(30):
            cand = best_p + lam * step
            f = obj(cand)
            if f < best_f:
                improved = True
                break
            lam *= 0.5
        if not improved:
            break
        decrease = best_f - f
        best_p, best_f = cand, f
        if decrease < REFINE_TOL_DEG:
            break
    return best_p, best_f


def linear_init(xy: np.ndarray, bearings_deg: np.ndarray) -> np.ndarray:
    """Least-squares point minimising squared perpendicular distance to rays.

    Raises
    ------
    DegenerateGeometry
        If all rays are parallel within tolerance.
    """
    d = bearing_to_vector(bearings_deg)
    if len(d) < 2:
        raise DegenerateGeometry("need at least two rays")
    cross = np.abs(d[:, None, 0] * d[None, :, 1] - d[:, None, 1] * d[None, :, 0])
    if cross.max() < PARALLEL_TOL:
        raise DegenerateGeometry("all rays are parallel")
    nrm = np.stack([-d[:, 1], d[:, 0]], axis=1)
    m = nrm.T @ nrm
    rhs = (nrm * (nrm * xy).sum(axis=1, keepdims=True)).sum(axis=0)
    return np.linalg.solve(m, rhs)


def refine_location(poses: Sequence[SlicePose], init=None) -> ImagePoint:
    """Camera location minimising the summed geometric error of ``poses``.

    Starts from ``init`` or the linear least-squares ray intersection, runs
    reweighted Gauss-Newton on the summed angular error, and also tries
    every forward pairwise ray intersection as a start (the L1 optimum
    tends to sit at such a vertex).  The best iterate seen is returned.

    Raises
    ------
    DegenerateGeometry
        Fewer than two poses, or all rays parallel.
    """
    if len(poses) < 2:
        raise DegenerateGeometry("refine_location needs at least two poses")
    xy, bearings, _ = pose_arrays(poses)
    p_lin = linear_init(xy, bearings)
    start = p_lin if init is None else np.asarray(init, dtype=float)
    obj = _AngularObjective(xy, np.mod(bearings + 180.0, 360.0))

    best_p, best_f = _irls(obj, start)
    dirs = bearing_to_vector(bearings)
    ia, ib = np.triu_indices(len(poses), k=1)
    verts, ok = intersect_rays(xy[ia], dirs[ia], xy[ib], dirs[ib])
    vert_best = None
    for v in verts[ok]:
        f = obj(v)
        if f < best_f:
            best_f, vert_best = f, v
    if vert_best is not None:
        p, f = _irls(obj, vert_best)
        best_p, best_f = (p, f) if f <= best_f else (vert_best, best_f)
    if not math.isfinite(best_f):
        return ImagePoint(float(p_lin[0]), float(p_lin[1]))
    if best_f > REFINE_TOL_DEG:
        # the objective is non-smooth; a simplex polish escapes IRLS stalls
        scale = max(1e-3, 1e-3 * float(np.abs(best_p).max()))
        res = optimize.minimize(
            obj,
            best_p,
            method="Nelder-Mead",
            options={
                "xatol": 1e-8,
                "fatol": 1e-10,
                "maxfev": 2000,
                "initial_simplex": [best_p, best_p + [scale, 0.0], best_p + [0.0, scale]],
            },
        )
        if res.fun < best_f:
            best_p, best_f = res.x, float(res.fun)
    return ImagePoint(float(best_p[0]), float(best_p[1]))


def location_objective(poses: Sequence[SlicePose], p) -> float:
    """Summed per-slice geometric error (degrees) at camera point ``p``."""
    xy, bearings, _ = pose_arrays(poses)
    return float(angles_between(p, xy, np.mod(bearings + 180.0, 360.0)).sum())


def slice_headings(poses: Sequence[SlicePose]) -> np.ndarray:
    """Per-slice camera heading estimates, de-rotated by the slicing angle."""
    _, bearings, centers = pose_arrays(poses)
    return np.mod(bearings + 180.0 - np.degrees(centers), 360.0)


def circular_mean_deg(angles_deg) -> float:
    a = np.radians(np.asarray(angles_deg, dtype=float))
    s, c = np.sin(a).sum(), np.cos(a).sum()
    if math.hypot(s, c) < 1e-12:
        raise UndefinedMean("resultant vector vanishes")
    return normalize_bearing(math.degrees(math.atan2(s, c)))


def camera_heading(poses: Sequence[SlicePose]) -> float:
    """Circular mean of the de-rotated per-slice headings, over all poses."""
    if len(poses) < 1:
        raise UndefinedMean("no poses")
    return circular_mean_deg(slice_headings(poses))


def ground_distance(camera_height: float, depression_deg: float) -> float:
    """Distance to where a ray ``depression_deg`` below horizontal meets flat ground."""
    if depression_deg >= 90.0:
        return 0.0
    return camera_height / math.tan(math.radians(depression_deg))


def search_region(
    prior_center,
    hfov_center: float,
    heading_prior: float,
    prior_half_width: float,
    camera_height: float,
    vfov: float,
    vfov_center_zenith: float,
    meters_per_pixel: float,
    max_radius: float,
    hfov: float = DEFAULT_HFOV_DEG,
) -> AnnularSector:
    """Annular sector where a slice's scene location can fall.

    Radii come from flat-ground trigonometry: the steepest ray of the slice
    gives the inner radius, the shallowest (clamped to 0.5 deg below the
    horizon) the outer radius, capped at ``max_radius``.

    Parameters
    ----------
    prior_center : (x, y)
        Camera position prior, pixels.
    hfov_center : float
        Slicing angle, radians.
    heading_prior, prior_half_width : float
        Heading prior and its half-width, degrees.
    camera_height : float
        Metres above ground.
    vfov, vfov_center_zenith : float
        Vertical field of view and the zenith angle of its center, degrees.
    meters_per_pixel, max_radius : float
    hfov : float
        Horizontal field of view of the slice, degrees.
    """
    if camera_height <= 0:
        raise InvalidConfig("camera_height must be positive")
    if not 0 < vfov <= 180:
        raise InvalidConfig("vfov must be in (0, 180]")
    if meters_per_pixel <= 0:
        raise InvalidConfig("meters_per_pixel must be positive")
    steep = min(vfov_center_zenith + vfov / 2.0 - 90.0, 90.0)
    shallow = max(vfov_center_zenith - vfov / 2.0 - 90.0, 0.5)
    if steep < shallow:
        raise InvalidConfig("slice does not see the ground")
    d1 = ground_distance(camera_height, steep) / meters_per_pixel
    d2 = min(ground_distance(camera_height, shallow) / meters_per_pixel, max_radius)
    if d1 >= d2:
        raise InvalidConfig(f"degenerate sector radii d1={d1}, d2={d2}")
    return AnnularSector(
        origin=ImagePoint(*prior_center),
        inner_radius=d1,
        outer_radius=d2,
        axis=heading_prior + math.degrees(hfov_center),
        half_angle=min(hfov / 2.0 + prior_half_width, 180.0),
    )


def point_in_sector(p, s: AnnularSector) -> bool:
    dx, dy = p[0] - s.origin.x, p[1] - s.origin.y
    r = math.hypot(dx, dy)
    if r < s.inner_radius or r > s.outer_radius:
        return False
    if r == 0.0:
        return True
    return circular_difference(vector_to_bearing([dx, dy]), s.axis) <= s.half_angle


def pairwise_intersections(poses: Sequence[SlicePose]):
    """All forward pairwise intersections as ``[(i, j, ImagePoint), ...]``, lexicographic."""
    out = []
    for i, j in combinations(range(len(poses)), 2):
        p = ray_intersection(poses[i], poses[j])
        if p is not None:
            out.append((i, j, p))
    return out
