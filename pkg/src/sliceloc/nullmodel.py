"""Background model of slice geometric errors under the null hypothesis.

The error density is piecewise: constant ``C`` on ``[0, t1)``, linear
``A*theta + B`` on ``[t1, t2)`` and zero from ``t2`` on.  Angles are in
degrees throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateFit, InsufficientSamples, InvalidConfig

MIN_CALIBRATION_SAMPLES = 10_000


@dataclass(frozen=True)
class NullModelParams:
    t1: float
    t2: float
    A: float
    B: float
    C: float
    K: float

    @classmethod
    def from_line(cls, t1: float, t2: float, A: float, B: float) -> "NullModelParams":
        """Build params with ``C`` from continuity at ``t1`` and ``K = integral of q``."""
        C = A * t1 + B
        K = C * t1 + 0.5 * A * (t2**2 - t1**2) + B * (t2 - t1)
        return cls(t1, t2, A, B, C, K)

    def validate(self) -> "NullModelParams":
        """Raise ``InvalidConfig`` unless the density is a usable model."""
        if not 0 < self.t1 < self.t2 <= 180:
            raise InvalidConfig(f"need 0 < t1 < t2 <= 180, got {self.t1}, {self.t2}")
        lo = min(self.A * self.t1, self.A * self.t2) + self.B
        if lo < -1e-15 or self.C < -1e-15:
            raise InvalidConfig("density is negative somewhere on [0, t2)")
        if not math.isclose(self.C, self.A * self.t1 + self.B, rel_tol=1e-9, abs_tol=1e-15):
            raise InvalidConfig("C breaks continuity at t1")
        if self.K <= 0:
            raise InvalidConfig("normalisation constant must be positive")
        return self

    @property
    def is_valid(self) -> bool:
        try:
            self.validate()
        except InvalidConfig:
            return False
        return True


# Slope and thresholds as published; intercept re-derived so q(t2) = 0.
# The published intercept (8.8e-4) makes q negative over most of [t1, t2).
DEFAULT_PARAMS = NullModelParams.from_line(50.0, 132.0, -6.7e-5, 6.7e-5 * 132.0)
PRINTED_PARAMS = NullModelParams.from_line(50.0, 132.0, -6.7e-5, 8.8e-4)


def q_density(theta, p: NullModelParams = DEFAULT_PARAMS):
    """Unnormalised density ``q(theta)``; accepts scalars or arrays."""
    t = np.asarray(theta, dtype=float)
    out = np.where(t < p.t1, p.C, np.where(t < p.t2, p.A * t + p.B, 0.0))
    return float(out) if out.ndim == 0 else out


def _primitive(t, p: NullModelParams):
    t = np.asarray(t, dtype=float)
    head = p.C * np.minimum(t, p.t1)
    tc = np.clip(t, p.t1, p.t2)
    lin = 0.5 * p.A * (tc * tc - p.t1 * p.t1) + p.B * (tc - p.t1)  # tc * tc: same rounding for scalars and arrays
    return head + lin


def q_cdf(theta, p: NullModelParams = DEFAULT_PARAMS):
    """``Q(theta) = (1/K) * integral_0^theta q``, clipped to ``[0, 1]``.

    Exactly 0 at 0 and exactly 1 from ``t2`` on.
    """
    t = np.asarray(theta, dtype=float)
    val = np.where(t >= p.t2, 1.0, np.clip(_primitive(t, p) / p.K, 0.0, 1.0))
    val = np.where(t <= 0.0, 0.0, val)
    return float(val) if val.ndim == 0 else val


def sample_errors(p: NullModelParams, size: int, rng: np.random.Generator, tail_max: float = 180.0):
    """Draw errors by inverting the cumulative of ``q``.

    ``q`` is read as a density over ``[0, tail_max]`` whose mass below ``t2``
    is ``K``; when ``K < 1`` the remaining ``1 - K`` is spread uniformly on
    ``[t2, tail_max]``.  With ``K >= 1`` all draws fall below ``t2``.
    """
    u = rng.random(size)
    below = min(p.K, 1.0)
    head = u < below
    out = np.empty(size)
    out[head] = _invert_primitive(u[head] / below * p.K, p)
    if below < 1.0:
        frac = (u[~head] - below) / (1.0 - below)
        out[~head] = p.t2 + frac * (tail_max - p.t2)
    return out


def _invert_primitive(m, p: NullModelParams):
    """Solve ``integral_0^theta q = m`` for theta (vectorised)."""
    m = np.asarray(m, dtype=float)
    m1 = p.C * p.t1
    theta = np.empty_like(m)
    flat = m < m1
    theta[flat] = m[flat] / p.C
    r = m[~flat] - m1
    if p.A == 0:
        theta[~flat] = p.t1 + r / p.B
    else:
        # A/2 x^2 + B x + c = 0 on [t1, t2]; stable two-root form
        a, b = 0.5 * p.A, p.B
        c = -(a * p.t1**2 + b * p.t1) - r
        disc = np.maximum(b * b - 4.0 * a * c, 0.0)
        qq = -0.5 * (b + math.copysign(1.0, b) * np.sqrt(disc))
        x1 = qq / a
        with np.errstate(divide="ignore", invalid="ignore"):
            x2 = c / qq
        inside = (x1 >= p.t1 - 1e-9) & (x1 <= p.t2 + 1e-9)
        theta[~flat] = np.where(inside, x1, x2)
    return np.clip(theta, 0.0, p.t2)


def calibrate(theta_samples, t1: float = 50.0, t2: float = 132.0, bin_width: float = 1.0) -> NullModelParams:
    """Fit the piecewise density to simulated geometric errors.

    Samples are histogrammed in 1 degree bins and normalised by the total
    sample count, so the fitted ``q`` is a density over all errors and ``K``
    comes out as the fraction of mass below ``t2``.  A least-squares line is
    fit to the bins inside ``[t1, t2)``; its intercept is raised just enough
    to keep the line non-negative on that interval, and ``C`` is set for
    continuity at ``t1``.

    Raises
    ------
    InsufficientSamples
        Fewer than 10^4 samples.
    DegenerateFit
        Fewer than three nonempty bins inside ``[t1, t2)``.
    """
    theta = np.asarray(theta_samples, dtype=float).ravel()
    if theta.size < MIN_CALIBRATION_SAMPLES:
        raise InsufficientSamples(f"need >= {MIN_CALIBRATION_SAMPLES} samples, got {theta.size}")
    if not 0 < t1 < t2:
        raise InvalidConfig("need 0 < t1 < t2")
    top = max(180.0, float(theta.max()))
    edges = np.arange(0.0, top + bin_width, bin_width)
    counts, edges = np.histogram(theta, bins=edges)
    density = counts / (theta.size * bin_width)
    centers = 0.5 * (edges[:-1] + edges[1:])
    in_lin = (edges[:-1] >= t1) & (edges[1:] <= t2)
    if np.count_nonzero(counts[in_lin]) < 3:
        raise DegenerateFit("fewer than 3 nonempty bins in the linear region")
    A, B = np.polyfit(centers[in_lin], density[in_lin], 1)
    B = max(B, -A * t2 if A < 0 else -A * t1)
    return NullModelParams.from_line(t1, t2, float(A), float(B))
