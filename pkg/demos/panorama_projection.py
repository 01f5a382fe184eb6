"""Walkthrough: slicing a depth panorama and placing scene positions on a map.

Run with ``python3 demos/panorama_projection.py``.
"""

# %%
import math

import numpy as np

from sliceloc.projection import (
    DepthPanorama,
    GeoTransform,
    SlicePlan,
    equirect_to_pinhole_map,
    scene_centroid,
    slice_window,
)

# %% [markdown]
# A synthetic panorama of flat ground 2 m below the camera, with a wall
# 8 m to the east.  Columns map to azimuth (0 = north, clockwise), rows to
# zenith angle.

# %%
W, H, h = 1024, 512, 2.0
phi = 2 * np.pi * np.arange(W) / W
omega = np.pi * np.arange(H) / H
with np.errstate(divide="ignore"):
    ground = np.where(omega > np.pi / 2, h / -np.cos(omega), 1e4)[:, None] * np.ones(W)
east = np.sin(phi)
with np.errstate(divide="ignore"):
    wall = np.where(east > 0, 8.0 / (np.sin(omega)[:, None] * east[None, :]), np.inf)
depth = np.minimum(ground, wall)
pano = DepthPanorama(np.minimum(depth, 1e4))
print(f"valid depth pixels: {pano.valid.mean():.1%}")

# %% [markdown]
# Twelve slices, 90 deg wide, pitched down 45 deg.  Each panorama column
# falls in three slice windows.

# %%
plan = SlicePlan()
cover = sum(slice_window(plan, i, W, H).any(axis=0).astype(int) for i in range(plan.n))
print(f"column coverage: min {cover.min()}, max {cover.max()}")

# %% [markdown]
# Scene positions on a 640 px, 0.11 m/px reference map centred on the camera.

# %%
g = GeoTransform(640, 640, 0.11)
for i in range(plan.n):
    c = scene_centroid(plan, i, pano, (0.0, 0.0, h), g)
    az = math.degrees(plan.hfov_center(i))
    print(f"  slice {i:2d} ({az:5.1f} deg): " + ("sky only" if c is None else f"({c.x:6.1f}, {c.y:6.1f}) px"))

# %% [markdown]
# Remap table for one slice image; sampling the panorama with it (for example
# through cv2.remap) gives the pinhole view.

# %%
mx, my = equirect_to_pinhole_map(plan, 3, W, H)
print(f"slice 3 samples columns {mx.min():.0f}..{mx.max():.0f}, rows {my.min():.0f}..{my.max():.0f}")
