"""Backprojection, normal estimation, intrinsics alignment, subsampling."""

import math

import numpy as np
import pytest

from geodispose.depth_geometry import (CameraIntrinsics, DepthMap,
                                       align_depth_to_intrinsics, backproject,
                                       estimate_normals, project, subsample)
from geodispose.errors import DimensionMismatch
from geodispose import synthetic_scenes as scenes
from geodispose.core_geometry import RigidMotion


K = CameraIntrinsics(fx=100.0, fy=100.0, cx=39.5, cy=29.5, width=80, height=60)


def flat_depth(z: float, k: CameraIntrinsics = K) -> DepthMap:
    return DepthMap(k.width, k.height, np.full((k.height, k.width), z))


class TestIntrinsics:
    def test_validation(self):
        with pytest.raises(ValueError):
            CameraIntrinsics(fx=-1, fy=1, cx=1, cy=1, width=4, height=4)
        with pytest.raises(ValueError):
            CameraIntrinsics(fx=1, fy=1, cx=10, cy=1, width=4, height=4)


class TestBackproject:
    def test_principal_point_on_axis(self):
        pc = backproject(flat_depth(2.0), K)
        # the pixel nearest the principal point backprojects near the z axis
        u, v = int(round(K.cx)), int(round(K.cy))
        p = pc.points[v * K.width + u]
        assert abs(p[0]) <= 0.5 / K.fx * 2.0 + 1e-12
        assert abs(p[1]) <= 0.5 / K.fy * 2.0 + 1e-12
        assert p[2] == 2.0

    def test_pinhole_formula(self):
        pc = backproject(flat_depth(1.5), K)
        u, v = 10, 20
        p = pc.points[v * K.width + u]
        assert np.allclose(p, [(u - K.cx) / K.fx * 1.5,
                               (v - K.cy) / K.fy * 1.5, 1.5])

    def test_invalid_pixels_masked(self):
        vals = np.full((K.height, K.width), 1.0)
        vals[5, 7] = 0.0
        pc = backproject(DepthMap(K.width, K.height, vals), K)
        assert not pc.valid[5 * K.width + 7]
        assert pc.valid_count() == K.width * K.height - 1

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            backproject(flat_depth(1.0), scenes.default_intrinsics())

    def test_projection_inverts_backprojection(self):
        pc = backproject(flat_depth(1.2), K)
        u, v, in_front = project(pc.points[pc.valid], K)
        uu, vv = np.meshgrid(np.arange(K.width), np.arange(K.height))
        assert in_front.all()
        assert np.abs(u - uu.reshape(-1)).max() < 1e-6
        assert np.abs(v - vv.reshape(-1)).max() < 1e-6


class TestNormals:
    def test_fronto_parallel_plane(self):
        d = flat_depth(1.0)
        pc = estimate_normals(backproject(d, K), d)
        n = pc.normals[pc.normal_valid]
        assert n.shape[0] > 0
        # camera-facing: -z
        assert np.abs(n - np.array([0.0, 0.0, -1.0])).max() < 1e-9

    def test_slanted_plane_matches_analytic(self):
        plane = scenes.Plane(point=(0, 0, 1.5), normal=(0.3, -0.2, -1.0))
        spec = scenes.SceneSpec((plane,), K)
        d = scenes.render_depth(spec, RigidMotion.identity())
        pc = estimate_normals(backproject(d, K), d)
        n = pc.normals[pc.normal_valid]
        cosang = n @ plane.normal
        worst = math.degrees(math.acos(min(1.0, cosang.min())))
        assert worst < 0.5

    def test_sphere_normals(self):
        sphere = scenes.Sphere(center=(0.0, 0.0, 1.5), radius=0.5)
        spec = scenes.SceneSpec((sphere,), K)
        d = scenes.render_depth(spec, RigidMotion.identity())
        pc = estimate_normals(backproject(d, K), d)
        idx = np.flatnonzero(pc.normal_valid)
        pts = pc.points[idx]
        # only interior sphere points (silhouette pixels have depth steps
        # already filtered by the discontinuity check)
        expected = np.stack([scenes.analytic_normal(sphere, p) for p in pts])
        # estimated normals face the camera; outward sphere normals on the
        # visible hemisphere do too
        cosang = np.einsum("ij,ij->i", pc.normals[idx], expected)
        errs = np.degrees(np.arccos(np.clip(cosang, -1.0, 1.0)))
        # curvature makes the finite-difference normal worst near the rim;
        # the bulk of the surface is sub-0.1 degree
        assert np.median(errs) < 0.1
        assert errs.max() < 2.5

    def test_discontinuity_invalidates(self):
        vals = np.full((K.height, K.width), 1.0)
        vals[:, 40:] = 1.5  # 0.5 m step, far above the 0.05 m threshold
        d = DepthMap(K.width, K.height, vals)
        pc = estimate_normals(backproject(d, K), d)
        ok = pc.normal_valid.reshape(K.height, K.width)
        assert not ok[:, 39:41].any()
        assert ok[10, 10] and ok[10, 70]

    def test_border_has_no_normals(self):
        d = flat_depth(1.0)
        pc = estimate_normals(backproject(d, K), d)
        ok = pc.normal_valid.reshape(K.height, K.width)
        assert not ok[0, :].any() and not ok[-1, :].any()
        assert not ok[:, 0].any() and not ok[:, -1].any()

    def test_normal_valid_subset_of_valid(self):
        vals = np.full((K.height, K.width), 1.0)
        vals[::7, ::5] = 0.0
        d = DepthMap(K.width, K.height, vals)
        pc = estimate_normals(backproject(d, K), d)
        assert not (pc.normal_valid & ~pc.valid).any()


class TestAlign:
    def test_identity_alignment_bit_exact(self):
        d = flat_depth(1.23)
        out = align_depth_to_intrinsics(d, K, K)
        assert out.values is d.values or np.array_equal(out.values, d.values)
        assert out.source_intrinsics == K

    def test_nearest_neighbor_against_loop_oracle(self):
        rng = np.random.default_rng(8)
        vals = rng.uniform(0.5, 3.0, size=(K.height, K.width))
        d = DepthMap(K.width, K.height, vals)
        to_k = CameraIntrinsics(fx=80.0, fy=85.0, cx=24.5, cy=19.5,
                                width=50, height=40)
        out = align_depth_to_intrinsics(d, K, to_k)
        for v in range(0, to_k.height, 7):
            for u in range(0, to_k.width, 9):
                rx = (u - to_k.cx) / to_k.fx
                ry = (v - to_k.cy) / to_k.fy
                su = int(round(rx * K.fx + K.cx))
                sv = int(round(ry * K.fy + K.cy))
                expect = vals[sv, su] if (0 <= su < K.width
                                          and 0 <= sv < K.height) else 0.0
                assert out.values[v, u] == expect

    def test_depth_values_never_rescaled(self):
        d = flat_depth(2.0)
        half = CameraIntrinsics(fx=K.fx / 2, fy=K.fy / 2, cx=19.5, cy=14.5,
                                width=40, height=30)
        out = align_depth_to_intrinsics(d, K, half)
        got = out.values[out.values > 0]
        assert got.size > 0 and np.all(got == 2.0)

    def test_backprojection_consistency_on_plane(self):
        # resampling a planar depth raster to other intrinsics must land all
        # backprojected points on the same plane
        plane = scenes.Plane(point=(0, 0, 1.5), normal=(0.2, 0.1, -1.0))
        spec = scenes.SceneSpec((plane,), K)
        d = scenes.render_depth(spec, RigidMotion.identity())
        to_k = CameraIntrinsics(fx=70.0, fy=70.0, cx=29.5, cy=24.5,
                                width=60, height=50)
        out = align_depth_to_intrinsics(d, K, to_k)
        pc = backproject(out, to_k)
        pts = pc.points[pc.valid]
        dist = np.abs((pts - plane.point) @ plane.normal)
        # nearest-neighbor sampling quantizes to the source pixel grid
        assert np.median(dist) < 0.01


class TestSubsample:
    def test_step_one_identity(self):
        d = flat_depth(1.0)
        pc = backproject(d, K)
        assert subsample(pc, 1) is pc

    def test_counts_and_raster_preserved(self):
        d = flat_depth(1.0)
        pc = estimate_normals(backproject(d, K), d)
        out = subsample(pc, 4)
        assert out.valid_count() == math.ceil(pc.valid_count() / 4)
        assert out.points.shape == pc.points.shape  # raster retained
        assert not (out.valid & ~pc.valid).any()
        assert not (out.normal_valid & ~out.valid).any()

    def test_invalid_step(self):
        pc = backproject(flat_depth(1.0), K)
        with pytest.raises(ValueError):
            subsample(pc, 0)


class TestDepthMap:
    def test_shape_enforced(self):
        with pytest.raises(ValueError):
            DepthMap(4, 3, np.zeros((4, 3)))

    def test_nonfinite_rejected(self):
        vals = np.zeros((3, 4))
        vals[0, 0] = np.nan
        with pytest.raises(ValueError):
            DepthMap(4, 3, vals)

    def test_valid_mask(self):
        vals = np.array([[0.0, 1.0], [-0.5, 2.0]])
        d = DepthMap(2, 2, vals)
        assert np.array_equal(d.valid_mask,
                              np.array([[False, True], [False, True]]))
