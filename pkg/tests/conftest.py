import math

import numpy as np
import pytest

from sliceloc.geometry import SlicePose, bearing_to_vector, normalize_bearing


def star(center, n=8, radius=100.0, heading=0.0):
    """Noiseless poses on a circle, every ray pointing at ``center``."""
    cx, cy = center
    poses = []
    for i in range(n):
        b = heading + 360.0 * i / n  # camera -> scene
        x, y = np.asarray(center) + radius * bearing_to_vector(b)
        poses.append(SlicePose.for_slice(i, n, x, y, b + 180.0))
    return poses


def poses_from_errors(errors_deg, camera=(0.0, 0.0), radius=50.0):
    """Poses whose geometric errors at ``camera`` are exactly ``errors_deg``."""
    n = len(errors_deg)
    poses = []
    for i, e in enumerate(errors_deg):
        b = 360.0 * i / n
        x, y = np.asarray(camera) + radius * bearing_to_vector(b)
        poses.append(SlicePose.for_slice(i, n, x, y, normalize_bearing(b + 180.0 + e)))
    return poses


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def oracle_angle(camera, pose):
    """Independent error via acos of the normalised dot product."""
    u = np.array([pose.x - camera[0], pose.y - camera[1]], dtype=float)
    u /= np.linalg.norm(u)
    b = math.radians(pose.bearing + 180.0)
    e = np.array([math.sin(b), -math.cos(b)])
    return math.degrees(math.acos(max(-1.0, min(1.0, float(u @ e)))))
