"""Depth rasters to organized point clouds with normals; intrinsics alignment.

Clouds keep full raster shape (one entry per pixel, index = v*width + u)
with a validity mask, so projective lookup into a cloud is O(1).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .errors import DimensionMismatch

# Normals are invalidated across depth steps larger than this (meters),
# to suppress foreground/background cross-product artifacts.
DEFAULT_DISC_THRESH = 0.05


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole intrinsics in pixels."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        if not (0 < self.cx < self.width and 0 < self.cy < self.height):
            raise ValueError("principal point must lie inside the image")


@dataclass(frozen=True)
class DepthMap:
    """Dense depth raster in meters; non-positive values are invalid."""

    width: int
    height: int
    values: np.ndarray  # (height, width), row-major
    source_intrinsics: Optional[CameraIntrinsics] = None

    def __post_init__(self):
        values = np.asarray(self.values)
        if values.shape != (self.height, self.width):
            raise ValueError(f"raster shape {values.shape} != "
                             f"({self.height}, {self.width})")
        if not np.all(np.isfinite(values)):
            raise ValueError("depth raster contains non-finite values")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def valid_mask(self) -> np.ndarray:
        return self.values > 0.0


@dataclass(frozen=True)
class PointCloud:
    """Organized point cloud in the camera frame.

    All arrays have one row per source pixel in raster order; `valid` masks
    usable points and `normal_valid` masks usable normals (always a subset).
    """

    points: np.ndarray        # (N, 3) meters
    normals: np.ndarray       # (N, 3) unit vectors where normal_valid
    pixel: np.ndarray         # (N, 2) integer (u, v)
    valid: np.ndarray         # (N,) bool
    normal_valid: np.ndarray  # (N,) bool
    width: int
    height: int

    def valid_count(self) -> int:
        return int(np.count_nonzero(self.valid))


def backproject(d: DepthMap, k: CameraIntrinsics) -> PointCloud:
    """Lift a depth raster to 3-D: p = ((u-cx)/fx * z, (v-cy)/fy * z, z)."""
    if (d.width, d.height) != (k.width, k.height):
        raise DimensionMismatch(f"depth {d.width}x{d.height} vs "
                                f"intrinsics {k.width}x{k.height}")
    z = d.values
    u = np.arange(d.width)
    v = np.arange(d.height)
    uu, vv = np.meshgrid(u, v)
    x = (uu - k.cx) / k.fx * z
    y = (vv - k.cy) / k.fy * z
    points = np.stack([x, y, z], axis=-1).reshape(-1, 3)
    valid = (z > 0.0).reshape(-1)
    pixel = np.stack([uu, vv], axis=-1).reshape(-1, 2)
    n = points.shape[0]
    return PointCloud(points=points, normals=np.zeros((n, 3)), pixel=pixel,
                      valid=valid, normal_valid=np.zeros(n, dtype=bool),
                      width=d.width, height=d.height)


def estimate_normals(pc: PointCloud, d: DepthMap,
                     disc_thresh: float = DEFAULT_DISC_THRESH) -> PointCloud:
    """Central-difference normals on the organized raster.

    Normal at (u, v) is the normalized cross product of the tangents spanned
    by backprojected neighbors (u±1, v) and (u, v±1). Entries are invalidated
    when any neighbor is invalid or when a neighbor depth step exceeds
    disc_thresh. Normals are oriented toward the camera.
    """
    h, w = pc.height, pc.width
    pts = pc.points.reshape(h, w, 3)
    z = d.values
    zvalid = z > 0.0

    ok = np.zeros((h, w), dtype=bool)
    ok[1:-1, 1:-1] = (zvalid[1:-1, 1:-1]
                      & zvalid[1:-1, :-2] & zvalid[1:-1, 2:]
                      & zvalid[:-2, 1:-1] & zvalid[2:, 1:-1])
    # depth-discontinuity check against all four neighbors
    disc = np.zeros((h, w), dtype=bool)
    c = z[1:-1, 1:-1]
    disc[1:-1, 1:-1] = ((np.abs(z[1:-1, 2:] - c) > disc_thresh)
                        | (np.abs(z[1:-1, :-2] - c) > disc_thresh)
                        | (np.abs(z[2:, 1:-1] - c) > disc_thresh)
                        | (np.abs(z[:-2, 1:-1] - c) > disc_thresh))
    ok &= ~disc

    du = np.zeros((h, w, 3))
    dv = np.zeros((h, w, 3))
    du[:, 1:-1] = pts[:, 2:] - pts[:, :-2]
    dv[1:-1, :] = pts[2:, :] - pts[:-2, :]
    normals = np.cross(du.reshape(-1, 3), dv.reshape(-1, 3))
    norms = np.linalg.norm(normals, axis=1)
    ok = ok.reshape(-1) & (norms > 1e-12)
    normals[ok] /= norms[ok, None]
    normals[~ok] = 0.0

    # orient toward camera: n . (-p) >= 0
    flip = np.einsum("ij,ij->i", normals, pc.points) > 0.0
    normals[flip] *= -1.0

    return replace(pc, normals=normals, normal_valid=ok & pc.valid)


def _scaled(k: CameraIntrinsics, width: int, height: int) -> CameraIntrinsics:
    sx = width / k.width
    sy = height / k.height
    return CameraIntrinsics(fx=k.fx * sx, fy=k.fy * sy,
                            cx=k.cx * sx, cy=k.cy * sy,
                            width=width, height=height)


def align_depth_to_intrinsics(d: DepthMap, from_k: CameraIntrinsics,
                              to_k: CameraIntrinsics) -> DepthMap:
    """Resample a depth raster onto the pixel grid of target intrinsics.

    Each target pixel's viewing ray (under to_k) is projected into the
    source raster (under from_k) and sampled nearest-neighbor. Depth values
    are never rescaled: only the raster geometry changes. from_k == to_k
    returns the raster bit-identical.
    """
    if from_k == to_k and (d.width, d.height) == (to_k.width, to_k.height):
        return DepthMap(d.width, d.height, d.values, source_intrinsics=to_k)

    # from_k describes the source camera at its native resolution; if the
    # raster was stored at another resolution, rescale proportionally.
    src_k = _scaled(from_k, d.width, d.height)

    u = np.arange(to_k.width)
    v = np.arange(to_k.height)
    uu, vv = np.meshgrid(u, v)
    ray_x = (uu - to_k.cx) / to_k.fx
    ray_y = (vv - to_k.cy) / to_k.fy
    su = np.rint(ray_x * src_k.fx + src_k.cx).astype(int)
    sv = np.rint(ray_y * src_k.fy + src_k.cy).astype(int)
    inside = (su >= 0) & (su < d.width) & (sv >= 0) & (sv < d.height)
    out = np.zeros((to_k.height, to_k.width), dtype=d.values.dtype)
    out[inside] = d.values[sv[inside], su[inside]]
    return DepthMap(to_k.width, to_k.height, out, source_intrinsics=to_k)


def subsample(pc: PointCloud, step: int) -> PointCloud:
    """Keep every step-th valid point in pixel raster order (step=1: identity)."""
    if step < 1:
        raise ValueError("step must be >= 1")
    if step == 1:
        return pc
    idx = np.flatnonzero(pc.valid)
    keep = idx[::step]
    valid = np.zeros_like(pc.valid)
    valid[keep] = True
    return replace(pc, valid=valid, normal_valid=pc.normal_valid & valid)


def project(points: np.ndarray, k: CameraIntrinsics):
    """Project (N, 3) camera-frame points to pixel coordinates.

    Returns (u, v, in_front) float arrays; in_front marks z > 0.
    """
    z = points[:, 2]
    in_front = z > 1e-12
    zsafe = np.where(in_front, z, 1.0)
    u = points[:, 0] / zsafe * k.fx + k.cx
    v = points[:, 1] / zsafe * k.fy + k.cy
    return u, v, in_front
