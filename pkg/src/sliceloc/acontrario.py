"""Rigidity ranking and number-of-false-alarms validation of slice poses.

For a candidate camera point every slice pose has a geometric error; a
``k``-subset whose largest error is ``alpha`` is scored by the bound

    eps(alpha, n, k) = (n - 2) * C(n, k) * C(k, 2) * Q(alpha) ** (k - 2)

and handled in log10.  ``osa_cvl`` tries every forward pairwise ray
intersection as a camera point, keeps the subset with the smallest bound,
and accepts the localisation when ``lg eps < tau``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Sequence, Tuple

import numpy as np

from . import geometry as geo
from .errors import DegenerateGeometry, InvalidArity
from .geometry import CameraPose, ErrorMode, ImagePoint, SlicePose
from .nullmodel import DEFAULT_PARAMS, NullModelParams, q_cdf

log = logging.getLogger(__name__)

DEFAULT_TAU = 0.0
STRICT_TAU = -1.0
OUT_OF_BOUNDS_MARGIN = 0.10


@dataclass(frozen=True)
class RigidityResult:
    """Outcome of one robust localisation.

    ``camera`` is set only when ``valid``.  ``estimate`` carries the refined
    pose over the best subset whether or not it passed the threshold, so
    rejected cases can still be scored against ground truth.
    """

    inlier_indices: Tuple[int, ...]
    alpha: float
    lg_eps: float
    valid: bool
    camera: Optional[CameraPose] = None
    estimate: Optional[CameraPose] = None
    pairs_tested: int = 0
    out_of_bounds: bool = False
    best_pair: Optional[Tuple[int, int]] = field(default=None, compare=False)


def rigidity_alpha(
    poses: Sequence[SlicePose],
    subset,
    camera_location,
    mode: ErrorMode = ErrorMode.PER_SLICE_BEARING,
    heading: Optional[float] = None,
) -> float:
    """Largest geometric error over ``subset`` at ``camera_location``."""
    idx = list(subset)
    if not idx:
        raise ValueError("subset must be nonempty")
    sel = [poses[i] for i in idx]
    xy, _, _ = geo.pose_arrays(sel)
    errs = geo.angles_between(camera_location, xy, geo.expected_bearings(sel, mode, heading))
    return float(errs.max())


@lru_cache(maxsize=None)
def log_count(n: int, k: int) -> float:
    """``log10((n - 2) * C(n, k) * C(k, 2))`` from exact integers."""
    if n < 3 or k < 3 or k > n:
        raise InvalidArity(f"need 3 <= k <= n, got n={n}, k={k}")
    return math.log10((n - 2) * math.comb(n, k) * math.comb(k, 2))


def log_epsilon(alpha: float, n: int, k: int, p: NullModelParams = DEFAULT_PARAMS) -> float:
    """log10 of the false-alarm bound for a ``k``-subset of ``n`` poses.

    Returns ``-inf`` when ``Q(alpha) == 0``.

    Raises
    ------
    InvalidArity
        If ``k < 3`` or ``k > n``.
    """
    return log_epsilon_q(q_cdf(alpha, p), n, k)


def log_epsilon_q(q: float, n: int, k: int) -> float:
    """Same bound, given ``Q(alpha)`` directly."""
    base = log_count(n, k)
    if q <= 0.0:
        return -math.inf
    return base + (k - 2) * math.log10(q)


def _log10_exact(q: np.ndarray) -> np.ndarray:
    # elementwise math.log10: numpy's SIMD log10 can differ by an ulp from the
    # scalar call, which would make scores depend on array shape
    out = np.full(q.shape, -np.inf)
    pos = q > 0.0
    out[pos] = [math.log10(v) for v in q[pos].tolist()]
    return out


def _log_count_table(n: int) -> np.ndarray:
    return np.array([log_count(n, k) for k in range(3, n + 1)])


def _best_prefix(lg: np.ndarray) -> np.ndarray:
    """Per-row argmin over k, ties resolved toward the larger k."""
    rev = lg[..., ::-1]
    return lg.shape[-1] - 1 - np.argmin(rev, axis=-1)


def _prefix_scores(errors: np.ndarray, p: NullModelParams):
    """Sorted order and ``lg eps`` for every prefix size ``k = 3..n``.

    ``errors`` has shape ``(m, n)``; returns ``(order, sorted_errors, lg)``
    with ``lg`` of shape ``(m, n - 2)``.
    """
    n = errors.shape[-1]
    order = np.argsort(errors, axis=-1, kind="stable")
    srt = np.take_along_axis(errors, order, axis=-1)
    q = q_cdf(srt[..., 2:], p)
    q = np.atleast_1d(np.asarray(q, dtype=float)).reshape(srt[..., 2:].shape)
    lq = _log10_exact(q)
    ks = np.arange(3, n + 1)
    lg = _log_count_table(n) + (ks - 2) * lq
    lg = np.where(q <= 0.0, -np.inf, lg)
    return order, srt, lg


def optimal_subset(
    poses: Sequence[SlicePose],
    camera_location,
    p: NullModelParams = DEFAULT_PARAMS,
    mode: ErrorMode = ErrorMode.PER_SLICE_BEARING,
    heading: Optional[float] = None,
) -> Tuple[Tuple[int, ...], float]:
    """Best sorted-prefix subset at a fixed camera point.

    Poses are ranked by geometric error; for each prefix size
    ``k = 3..n`` the bound is evaluated at the ``k``-th error and the
    smallest wins (ties go to the larger ``k``).

    Returns
    -------
    subset : tuple of int
        Positions into ``poses``, sorted ascending.
    lg_eps : float
        log10 bound of that subset (``-inf`` if its rigidity is zero).
    """
    n = len(poses)
    if n < 3:
        raise InvalidArity("need at least 3 poses")
    xy, _, _ = geo.pose_arrays(poses)
    errs = geo.angles_between(camera_location, xy, geo.expected_bearings(poses, mode, heading))
    order, _, lg = _prefix_scores(errs[None, :], p)
    j = int(_best_prefix(lg)[0])
    return tuple(sorted(int(i) for i in order[0, : j + 3])), float(lg[0, j])


def _image_out_of_bounds(pt, bounds) -> bool:
    if bounds is None:
        return False
    w, h = bounds
    mx, my = OUT_OF_BOUNDS_MARGIN * w, OUT_OF_BOUNDS_MARGIN * h
    return not (-mx <= pt[0] <= w + mx and -my <= pt[1] <= h + my)


def osa_cvl(
    poses: Sequence[SlicePose],
    tau: float = DEFAULT_TAU,
    p: NullModelParams = DEFAULT_PARAMS,
    mode: ErrorMode = ErrorMode.PER_SLICE_BEARING,
    heading: Optional[float] = None,
    bounds: Optional[Tuple[float, float]] = None,
) -> RigidityResult:
    """Robust camera pose from redundant slice poses, with NFA validation.

    Every pose pair whose scene->camera rays meet in front of both poses
    yields a camera candidate.  At each candidate the optimal prefix subset
    is found; the candidate with the smallest ``lg eps`` wins (the first
    one in lexicographic pair order among exact ties).  The location is
    then refined over the winning subset and the heading is the circular
    mean over all poses.

    Parameters
    ----------
    poses : sequence of SlicePose
        At least three observations.
    tau : float
        log10 meaningfulness threshold; the result is valid iff
        ``lg_eps < tau``.
    p : NullModelParams
    mode : ErrorMode
        ``GLOBAL_HEADING`` measures errors against ``heading`` (default:
        the circular mean heading of all poses).
    heading : float, optional
    bounds : (width, height), optional
        Reference image size; refined locations more than 10% outside are
        flagged ``out_of_bounds``.

    Returns
    -------
    RigidityResult
        If no pair intersects, an invalid result with ``lg_eps = +inf`` and
        ``pairs_tested = 0``.

    Raises
    ------
    InvalidArity
        Fewer than three poses.
    UndefinedMean
        The per-slice headings cancel exactly, so no heading exists.
    """
    n = len(poses)
    if n < 3:
        raise InvalidArity("osa_cvl needs at least 3 poses")
    mode = ErrorMode(mode)
    if mode is ErrorMode.GLOBAL_HEADING and heading is None:
        heading = geo.camera_heading(poses)

    xy, bearings, _ = geo.pose_arrays(poses)
    dirs = geo.bearing_to_vector(bearings)
    ia, ib = np.triu_indices(n, k=1)
    pts, ok = geo.intersect_rays(xy[ia], dirs[ia], xy[ib], dirs[ib])

    # drop candidates sitting on a scene location, where errors are undefined
    dist = np.hypot(*(xy[None, :, :] - pts[:, None, :]).transpose(2, 0, 1))
    ok &= ~np.any(dist <= geo.COINCIDENT_TOL, axis=1)
    cand = np.flatnonzero(ok)

    if cand.size == 0:
        log.debug("no intersecting pose pair among %d poses", n)
        return RigidityResult((), math.inf, math.inf, False, pairs_tested=0)

    expected = geo.expected_bearings(poses, mode, heading)
    errs = geo.angles_between(pts[cand][:, None, :], xy, expected)
    order, srt, lg = _prefix_scores(errs, p)
    best_k = _best_prefix(lg)
    row_best = lg[np.arange(cand.size), best_k]
    winner = int(np.argmin(row_best))  # first occurrence on ties
    k = int(best_k[winner]) + 3
    lg_eps = float(row_best[winner])
    subset = order[winner, :k]
    alpha = float(srt[winner, k - 1])
    pair = (int(ia[cand[winner]]), int(ib[cand[winner]]))

    inliers = tuple(sorted(poses[int(i)].slice_index for i in subset))
    chosen = [poses[int(i)] for i in sorted(subset)]
    try:
        loc = geo.refine_location(chosen, init=pts[cand[winner]])
    except DegenerateGeometry:
        loc = ImagePoint(*map(float, pts[cand[winner]]))
    estimate = CameraPose(loc.x, loc.y, geo.camera_heading(poses))
    valid = lg_eps < tau
    return RigidityResult(
        inlier_indices=inliers,
        alpha=alpha,
        lg_eps=lg_eps,
        valid=valid,
        camera=estimate if valid else None,
        estimate=estimate,
        pairs_tested=int(cand.size),
        out_of_bounds=_image_out_of_bounds(loc, bounds),
        best_pair=pair,
    )


def nfa_upper_bound_check(
    poses: Sequence[SlicePose],
    camera_location,
    subset,
    p: NullModelParams = DEFAULT_PARAMS,
    alpha: Optional[float] = None,
    sampled: Optional[Tuple[int, int]] = None,
) -> bool:
    """Check the inequalities the false-alarm bound rests on.

    With ``alpha`` defaulting to the subset's rigidity, verifies that

    * every member error is at most ``alpha`` (the subset is alpha-rigid),
    * ``log_epsilon`` agrees with the bound recomputed term by term, and
    * ``Q(alpha) ** (k - 2)`` dominates the product of ``Q`` over the
      members not used to place the camera (``sampled``; by default the
      two members with the smallest errors).
    """
    idx = sorted(subset)
    n, k = len(poses), len(idx)
    if k < 3:
        return False
    sel = [poses[i] for i in idx]
    xy, _, _ = geo.pose_arrays(sel)
    errs = geo.angles_between(camera_location, xy, geo.expected_bearings(sel))
    if alpha is None:
        alpha = float(errs.max())
    if np.any(errs > alpha + 1e-12):
        return False

    q_alpha = q_cdf(alpha, p)
    direct = (n - 2) * math.comb(n, k) * math.comb(k, 2) * q_alpha ** (k - 2)
    lg = log_epsilon(alpha, n, k, p)
    if direct == 0.0:
        identity = lg == -math.inf
    else:
        identity = math.isclose(10.0**lg, direct, rel_tol=1e-9)

    if sampled is None:
        rest = np.sort(errs)[2:]
    else:
        keep = [j for j, i in enumerate(idx) if i not in sampled]
        rest = errs[keep]
    product = float(np.prod(q_cdf(rest, p))) if rest.size else 1.0
    return bool(identity and q_alpha ** (k - 2) >= product * (1 - 1e-12))
