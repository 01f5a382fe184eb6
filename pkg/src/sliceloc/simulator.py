"""Synthetic slice-pose scenes and null-hypothesis error samples.

All randomness comes from Philox streams keyed by ``(seed, trial, tag)``,
so a trial's output does not depend on which worker ran it or in what
order.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np

from . import geometry as geo
from .acontrario import DEFAULT_TAU, RigidityResult, osa_cvl
from .errors import InvalidConfig
from .geometry import AnnularSector, CameraPose, SlicePose
from .nullmodel import DEFAULT_PARAMS, NullModelParams

STREAM_SCENE = 0
STREAM_NULL = 1


@dataclass(frozen=True)
class ScenarioConfig:
    """Parameters of a synthetic localisation scene.

    Outlier and null scene locations are drawn uniformly (by area) from an
    annular sector centred on the camera and aimed along each slice's true
    viewing direction; ``sector_half_angle`` defaults to half the 90 degree
    slice HFoV plus ``heading_prior_half_width``.
    """

    n: int = 12
    seed: int = 0
    outlier_fraction: float = 0.0
    bearing_noise_sigma: float = 0.0
    location_noise_sigma: float = 0.0
    range_min: float = 30.0
    range_max: float = 250.0
    heading_prior_half_width: float = 45.0
    sector_inner: float = 2.0
    sector_outer: float = 300.0
    sector_half_angle: float = 90.0
    meters_per_pixel: float = 0.11
    image_size: int = 640
    position_jitter: float = 160.0

    def __post_init__(self):
        if self.n < 3:
            raise InvalidConfig("n must be at least 3")
        if not 0.0 <= self.outlier_fraction <= 1.0:
            raise InvalidConfig("outlier_fraction must be in [0, 1]")
        if not 0.0 <= self.range_min < self.range_max:
            raise InvalidConfig("need 0 <= range_min < range_max")
        if self.bearing_noise_sigma < 0 or self.location_noise_sigma < 0:
            raise InvalidConfig("noise sigmas must be non-negative")
        if self.meters_per_pixel <= 0:
            raise InvalidConfig("meters_per_pixel must be positive")
        # validates the sector shape
        self.sector_for(geo.ImagePoint(0.0, 0.0), 0.0)

    @property
    def n_inliers(self) -> int:
        return int(math.floor((1.0 - self.outlier_fraction) * self.n + 0.5))

    def sector_for(self, camera, axis: float) -> AnnularSector:
        return AnnularSector(camera, self.sector_inner, self.sector_outer, axis, self.sector_half_angle)


@dataclass(frozen=True)
class SyntheticScene:
    ground_truth: CameraPose
    poses: Tuple[SlicePose, ...]
    inlier_mask: Tuple[bool, ...]


def stream(seed: int, trial: int, tag: int) -> np.random.Generator:
    """Counter-based generator for one ``(seed, trial, tag)`` substream."""
    ss = np.random.SeedSequence([seed & (2**64 - 1), trial, tag])
    return np.random.Generator(np.random.Philox(ss))


def generate_scene(cfg: ScenarioConfig, trial: int = 0, tag: int = STREAM_SCENE) -> SyntheticScene:
    """Draw one scene: a camera, ``n`` slice poses and the true inlier mask.

    Inlier ``i`` sits at range ``U(range_min, range_max)`` along the true
    camera->scene bearing ``heading + 360 i / n`` with Gaussian location and
    bearing noise.  Outliers are uniform in the slice's sector with a bearing
    uniform within ``heading_prior_half_width`` of the true reverse bearing.
    """
    rng = stream(cfg.seed, trial, tag)
    n = cfg.n
    centre = cfg.image_size / 2.0
    cam = centre + rng.uniform(-cfg.position_jitter, cfg.position_jitter, 2)
    heading = float(rng.uniform(0.0, 360.0))

    # fixed draw order keeps streams aligned whatever the outlier split
    ranges = rng.uniform(cfg.range_min, cfg.range_max, n)
    loc_noise = rng.normal(0.0, 1.0, (n, 2)) * cfg.location_noise_sigma
    brg_noise = rng.normal(0.0, 1.0, n) * cfg.bearing_noise_sigma
    order = rng.permutation(n)
    out_u = rng.random((n, 3))

    n_out = n - cfg.n_inliers
    is_out = np.zeros(n, dtype=bool)
    is_out[order[:n_out]] = True

    poses = []
    for i in range(n):
        b = heading + 360.0 * i / n
        if is_out[i]:
            sector = cfg.sector_for(geo.ImagePoint(*cam), b)
            d1, d2 = sector.inner_radius, sector.outer_radius
            r = math.sqrt(d1 * d1 + out_u[i, 0] * (d2 * d2 - d1 * d1))
            ang = sector.axis + (2.0 * out_u[i, 1] - 1.0) * sector.half_angle
            loc = cam + r * geo.bearing_to_vector(ang)
            brg = b + 180.0 + (2.0 * out_u[i, 2] - 1.0) * cfg.heading_prior_half_width
        else:
            loc = cam + ranges[i] * geo.bearing_to_vector(b) + loc_noise[i]
            brg = b + 180.0 + brg_noise[i]
        poses.append(SlicePose.for_slice(i, n, loc[0], loc[1], brg))

    return SyntheticScene(
        ground_truth=CameraPose(float(cam[0]), float(cam[1]), heading),
        poses=tuple(poses),
        inlier_mask=tuple(bool(not o) for o in is_out),
    )


def first_pair_errors(poses: Sequence[SlicePose]) -> Optional[np.ndarray]:
    """Errors of the non-sampled poses at the first intersecting pair's point."""
    xy, bearings, _ = geo.pose_arrays(poses)
    dirs = geo.bearing_to_vector(bearings)
    ia, ib = np.triu_indices(len(poses), k=1)
    pts, ok = geo.intersect_rays(xy[ia], dirs[ia], xy[ib], dirs[ib])
    hits = np.flatnonzero(ok)
    if hits.size == 0:
        return None
    j = hits[0]
    rest = np.ones(len(poses), dtype=bool)
    rest[[ia[j], ib[j]]] = False
    try:
        return geo.angles_between(pts[j], xy[rest], np.mod(bearings[rest] + 180.0, 360.0))
    except geo.DegenerateGeometry:
        return None


def simulate_null_thetas(cfg: ScenarioConfig, n_samples: int) -> np.ndarray:
    """Geometric errors of naive poses from pure-null scenes.

    Each scene contributes the ``n - 2`` errors measured at the camera
    point placed by its first intersecting pose pair.
    """
    if n_samples < 1:
        raise InvalidConfig("n_samples must be positive")
    null_cfg = replace(cfg, outlier_fraction=1.0)
    out: List[np.ndarray] = []
    got = 0
    trial = 0
    while got < n_samples:
        scene = generate_scene(null_cfg, trial, STREAM_NULL)
        trial += 1
        errs = first_pair_errors(scene.poses)
        if errs is None:
            continue
        out.append(errs)
        got += errs.size
    return np.concatenate(out)[:n_samples]


@dataclass(frozen=True)
class TrialRecord:
    trial: int
    scene: SyntheticScene
    result: RigidityResult
    loc_error_m: Optional[float]
    heading_error_deg: Optional[float]
    precision: Optional[float]
    recall: Optional[float]

    @property
    def valid(self) -> bool:
        return self.result.valid


def _score(trial: int, scene: SyntheticScene, result: RigidityResult, mpp: float) -> TrialRecord:
    gt = scene.ground_truth
    est = result.estimate
    loc_err = hdg_err = None
    if est is not None:
        loc_err = math.hypot(est.x - gt.x, est.y - gt.y) * mpp
        hdg_err = geo.circular_difference(est.heading, gt.heading)
    truth = {p.slice_index for p, m in zip(scene.poses, scene.inlier_mask) if m}
    found = set(result.inlier_indices)
    hit = len(truth & found)
    precision = hit / len(found) if found else None
    recall = hit / len(truth) if truth else None
    return TrialRecord(trial, scene, result, loc_err, hdg_err, precision, recall)


def run_trial(cfg: ScenarioConfig, trial: int, tau: float = DEFAULT_TAU,
              p: NullModelParams = DEFAULT_PARAMS) -> TrialRecord:
    scene = generate_scene(cfg, trial)
    size = (cfg.image_size, cfg.image_size)
    result = osa_cvl(scene.poses, tau=tau, p=p, bounds=size)
    return _score(trial, scene, result, cfg.meters_per_pixel)


def run_trials(cfg: ScenarioConfig, trials: int, tau: float = DEFAULT_TAU,
               p: NullModelParams = DEFAULT_PARAMS, workers: int = 1) -> List[TrialRecord]:
    """Run independent seeded trials; output is ordered by trial index."""
    if trials < 1:
        raise InvalidConfig("trials must be positive")
    if workers <= 1:
        return [run_trial(cfg, t, tau, p) for t in range(trials)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda t: run_trial(cfg, t, tau, p), range(trials)))
