"""Deterministic ray-cast depth renderer for plane/sphere/box scenes.

Provides exact analytic ground truth (depth, normals, relative motion) for
testing the alignment and disposal stages without any real sensor data.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .core_geometry import RigidMotion
from .depth_geometry import CameraIntrinsics, DepthMap


@dataclass(frozen=True)
class Plane:
    point: np.ndarray
    normal: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.point, dtype=float).reshape(3)
        n = np.asarray(self.normal, dtype=float).reshape(3)
        n = n / np.linalg.norm(n)
        object.__setattr__(self, "point", p)
        object.__setattr__(self, "normal", n)


@dataclass(frozen=True)
class Sphere:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center",
                           np.asarray(self.center, dtype=float).reshape(3))


@dataclass(frozen=True)
class Box:
    center: np.ndarray
    half_extents: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "center",
                           np.asarray(self.center, dtype=float).reshape(3))
        object.__setattr__(self, "half_extents",
                           np.asarray(self.half_extents, dtype=float).reshape(3))


Primitive = Union[Plane, Sphere, Box]


@dataclass(frozen=True)
class SceneSpec:
    primitives: tuple
    intrinsics: CameraIntrinsics
    depth_noise_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not self.primitives:
            raise ValueError("scene needs at least one primitive")
        if self.depth_noise_sigma < 0:
            raise ValueError("noise sigma must be >= 0")
        object.__setattr__(self, "primitives", tuple(self.primitives))


def default_intrinsics(width: int = 160, height: int = 120) -> CameraIntrinsics:
    f = 0.8 * width
    return CameraIntrinsics(fx=f, fy=f, cx=width / 2.0 - 0.5,
                            cy=height / 2.0 - 0.5, width=width, height=height)


def corner_scene(intrinsics: Optional[CameraIntrinsics] = None,
                 depth_noise_sigma: float = 0.0, seed: int = 0,
                 with_sphere: bool = True) -> SceneSpec:
    """Default test scene: three mutually orthogonal planes plus one sphere.

    Camera at the origin looking +z sees a room-corner arrangement that
    constrains all six degrees of freedom for point-to-plane alignment.
    with_sphere=False gives a pure planar corner where point-to-plane
    residuals vanish exactly at the true pose.
    """
    if intrinsics is None:
        intrinsics = default_intrinsics()
    prims = [
        Plane(point=(0.0, 0.0, 2.0), normal=(0.0, 0.0, -1.0)),   # back wall
        Plane(point=(0.9, 0.0, 0.0), normal=(-1.0, 0.0, 0.0)),   # right wall
        Plane(point=(0.0, 0.7, 0.0), normal=(0.0, -1.0, 0.0)),   # floor
    ]
    if with_sphere:
        prims.append(Sphere(center=(-0.15, -0.1, 1.4), radius=0.3))
    return SceneSpec(primitives=tuple(prims), intrinsics=intrinsics,
                     depth_noise_sigma=depth_noise_sigma, seed=seed)


def ball_pit_scene(intrinsics: Optional[CameraIntrinsics] = None,
                   depth_noise_sigma: float = 0.0, seed: int = 0) -> SceneSpec:
    """Fronto-parallel wall plus four spheres covering most of the view.

    Curvature everywhere means any rigid misalignment spreads residual over
    the whole raster: unlike plane-dominated scenes there is no sliding
    motion that keeps a majority of pixels self-aligned, so the ICP basin
    around the true pose is clean for perturbations of several degrees.
    """
    if intrinsics is None:
        intrinsics = default_intrinsics()
    prims = (
        Plane(point=(0.0, 0.0, 2.0), normal=(0.0, 0.0, -1.0)),
        Sphere(center=(0.25, 0.05, 1.45), radius=0.45),
        Sphere(center=(-0.5, -0.32, 1.75), radius=0.35),
        Sphere(center=(-0.4, 0.42, 1.65), radius=0.3),
        Sphere(center=(0.55, -0.45, 1.75), radius=0.32),
    )
    return SceneSpec(primitives=prims, intrinsics=intrinsics,
                     depth_noise_sigma=depth_noise_sigma, seed=seed)


def single_plane_scene(intrinsics: Optional[CameraIntrinsics] = None,
                       z: float = 1.0) -> SceneSpec:
    """Degenerate scene: one fronto-parallel plane (rank-3 for point-to-plane)."""
    if intrinsics is None:
        intrinsics = default_intrinsics()
    return SceneSpec(primitives=(Plane(point=(0, 0, z), normal=(0, 0, -1)),),
                     intrinsics=intrinsics)


def _intersect_plane(o, d, prim: Plane):
    denom = d @ prim.normal
    num = (prim.point - o) @ prim.normal
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.where(np.abs(denom) > 1e-12, num / denom, np.inf)
    return np.where(s > 1e-9, s, np.inf)


def _intersect_sphere(o, d, prim: Sphere):
    oc = o - prim.center
    a = np.einsum("ij,ij->i", d, d)
    b = 2.0 * (d @ oc)
    c = oc @ oc - prim.radius**2
    disc = b * b - 4 * a * c
    hit = disc >= 0.0
    sq = np.sqrt(np.where(hit, disc, 0.0))
    s1 = (-b - sq) / (2 * a)
    s2 = (-b + sq) / (2 * a)
    s = np.where(s1 > 1e-9, s1, s2)
    return np.where(hit & (s > 1e-9), s, np.inf)


def _intersect_box(o, d, prim: Box):
    lo = prim.center - prim.half_extents
    hi = prim.center + prim.half_extents
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / d
    t1 = (lo - o) * inv
    t2 = (hi - o) * inv
    tmin = np.minimum(t1, t2).max(axis=1)
    tmax = np.maximum(t1, t2).min(axis=1)
    hit = (tmax >= tmin) & (tmax > 1e-9)
    s = np.where(tmin > 1e-9, tmin, tmax)
    return np.where(hit & (s > 1e-9), s, np.inf)


def render_depth(scene: SceneSpec, camera_pose: RigidMotion) -> DepthMap:
    """Ray-cast the scene from a camera-to-world pose; nearest positive hit.

    Depth is the camera-frame z of the hit (standard depth-image convention),
    with optional seeded Gaussian noise. Pixels with no hit are invalid (0).
    """
    k = scene.intrinsics
    u = np.arange(k.width)
    v = np.arange(k.height)
    uu, vv = np.meshgrid(u, v)
    # camera-frame ray directions with unit z, so ray parameter == depth z
    d_cam = np.stack([(uu - k.cx) / k.fx, (vv - k.cy) / k.fy,
                      np.ones_like(uu, dtype=float)], axis=-1).reshape(-1, 3)
    R = camera_pose.rotation.to_matrix()
    d_world = d_cam @ R.T
    o_world = camera_pose.translation

    best = np.full(d_world.shape[0], np.inf)
    for prim in scene.primitives:
        if isinstance(prim, Plane):
            s = _intersect_plane(o_world, d_world, prim)
        elif isinstance(prim, Sphere):
            s = _intersect_sphere(o_world, d_world, prim)
        else:
            s = _intersect_box(o_world, d_world, prim)
        best = np.minimum(best, s)

    z = np.where(np.isfinite(best), best, 0.0)
    if scene.depth_noise_sigma > 0.0:
        rng = np.random.default_rng(scene.seed)
        noise = rng.normal(0.0, scene.depth_noise_sigma, size=z.shape)
        z = np.where(z > 0.0, np.maximum(z + noise, 0.0), 0.0)
    return DepthMap(k.width, k.height, z.reshape(k.height, k.width),
                    source_intrinsics=k)


def make_pair(scene: SceneSpec, motion: RigidMotion):
    """Render from identity and from `motion` (camera-B camera-to-world pose).

    Returns (depth_a, depth_b, gt). Camera A sits at the world origin, so the
    ground-truth relative motion invert(P_a) o P_b equals `motion`: it maps
    camera-B points into the camera-A frame.
    """
    depth_a = render_depth(scene, RigidMotion.identity())
    depth_b = render_depth(scene, motion)
    return depth_a, depth_b, motion


def analytic_normal(prim: Primitive, point: np.ndarray) -> np.ndarray:
    """Outward analytic surface normal at a point on the primitive."""
    if isinstance(prim, Plane):
        return prim.normal
    if isinstance(prim, Sphere):
        n = np.asarray(point) - prim.center
        return n / np.linalg.norm(n)
    rel = (np.asarray(point) - prim.center) / prim.half_extents
    axis = int(np.argmax(np.abs(rel)))
    n = np.zeros(3)
    n[axis] = math.copysign(1.0, rel[axis])
    return n
