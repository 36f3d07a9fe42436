"""Index/trajectory parsing, timestamp association, 16-bit depth decoding."""

import io
import math

import numpy as np
import pytest
from PIL import Image

from geodispose.core_geometry import (RigidMotion, UnitQuaternion, compose,
                                      invert)
from geodispose.dataset_tum import (DEFAULT_ASSOCIATION_TOL,
                                    DEFAULT_DEPTH_DIVISOR, AssociatedFrame,
                                    FrameRecord, associate,
                                    intrinsics_for_sequence, load_depth_png,
                                    load_sequence, parse_groundtruth,
                                    parse_index_file, relative_gt_motion)
from geodispose.errors import (EmptyAssociation, MissingGroundTruth,
                               NonUnitQuaternion, ParseError, WrongBitDepth,
                               DecodeError)


def png_bytes(arr: np.ndarray) -> bytes:
    img = Image.fromarray(arr.astype(np.uint16))
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return buf.getvalue()


class TestParseIndex:
    def test_basic(self):
        text = ("# comment line\n"
                "1305031102.175304 rgb/1305031102.175304.png\n"
                "1305031102.211214 rgb/1305031102.211214.png\n")
        recs = parse_index_file(text)
        assert len(recs) == 2
        assert recs[0] == FrameRecord(1305031102.175304,
                                      "rgb/1305031102.175304.png")

    def test_blank_lines_skipped(self):
        assert parse_index_file("\n\n# x\n") == []

    def test_scrambled_order_resorted(self):
        text = "2.0 b.png\n1.0 a.png\n3.0 c.png\n"
        recs = parse_index_file(text)
        assert [r.timestamp for r in recs] == [1.0, 2.0, 3.0]

    def test_bad_field_count(self):
        with pytest.raises(ParseError) as e:
            parse_index_file("1.0 a.png extra\n")
        assert e.value.line_number == 1

    def test_bad_timestamp(self):
        with pytest.raises(ParseError):
            parse_index_file("abc a.png\n")
        with pytest.raises(ParseError):
            parse_index_file("nan a.png\n")


class TestParseGroundtruth:
    def test_parse_and_pose(self):
        text = "# ts tx ty tz qx qy qz qw\n1.5 1.0 2.0 3.0 0.0 0.0 0.0 1.0\n"
        poses = parse_groundtruth(text)
        assert len(poses) == 1
        ts, pose = poses[0]
        assert ts == 1.5
        assert np.array_equal(pose.translation, [1.0, 2.0, 3.0])
        assert pose.rotation == UnitQuaternion.identity()

    def test_slightly_off_unit_renormalized(self):
        text = "1.0 0 0 0 0.0 0.0 0.0 1.0005\n"
        (_, pose), = parse_groundtruth(text)
        assert abs(pose.rotation.w - 1.0) < 1e-12

    def test_badly_off_unit_rejected(self):
        with pytest.raises(NonUnitQuaternion):
            parse_groundtruth("1.0 0 0 0 0.0 0.0 0.0 1.2\n")

    def test_field_count(self):
        with pytest.raises(ParseError):
            parse_groundtruth("1.0 0 0 0 0 0 1\n")


class TestAssociate:
    def rgb(self, *ts):
        return [FrameRecord(t, f"rgb/{t}.png") for t in ts]

    def depth(self, *ts):
        return [FrameRecord(t, f"depth/{t}.png") for t in ts]

    def test_tolerance_boundary(self):
        # 0.019 s inside the 0.02 s tolerance, 0.021 s outside
        frames = associate(self.rgb(1.000), self.depth(1.019))
        assert len(frames) == 1
        with pytest.raises(EmptyAssociation):
            associate(self.rgb(1.000), self.depth(1.021))

    def test_greedy_nearest_oracle(self):
        # hand-worked greedy matching on a 5x5 grid of candidates
        rgb = self.rgb(1.00, 1.05, 1.10, 1.15, 1.20)
        depth = self.depth(1.004, 1.052, 1.099, 1.162, 1.35)
        frames = associate(rgb, depth)
        got = [(f.rgb.timestamp, f.depth.timestamp) for f in frames]
        assert got == [(1.00, 1.004), (1.05, 1.052), (1.10, 1.099),
                       (1.15, 1.162)]

    def test_each_frame_used_once(self):
        # two rgb frames compete for one depth frame; nearest wins
        frames = associate(self.rgb(1.000, 1.010), self.depth(1.008))
        assert len(frames) == 1
        assert frames[0].rgb.timestamp == 1.010

    def test_gt_attachment(self):
        gt = [(1.001, RigidMotion.identity()),
              (1.055, RigidMotion(UnitQuaternion.identity(),
                                  np.array([1.0, 0, 0])))]
        frames = associate(self.rgb(1.00, 1.05, 2.00),
                           self.depth(1.00, 1.05, 2.00), gt)
        assert frames[0].gt_pose is not None
        assert frames[1].gt_pose is not None
        assert np.array_equal(frames[1].gt_pose.translation, [1.0, 0, 0])
        assert frames[2].gt_pose is None  # no gt within tolerance


class TestDepthPng:
    def test_divisor_5000(self):
        arr = np.zeros((4, 6), dtype=np.uint16)
        arr[1, 2] = 5000
        arr[2, 3] = 65535
        d = load_depth_png(png_bytes(arr))
        assert d.values[1, 2] == 1.0
        assert abs(d.values[2, 3] - 13.107) < 1e-12
        assert d.values[0, 0] == 0.0
        assert d.width == 6 and d.height == 4

    def test_roundtrip_random(self):
        rng = np.random.default_rng(17)
        arr = rng.integers(0, 65536, size=(8, 10)).astype(np.uint16)
        d = load_depth_png(png_bytes(arr))
        assert np.abs(d.values * DEFAULT_DEPTH_DIVISOR - arr).max() < 1e-9

    def test_eight_bit_rejected(self):
        img = Image.new("L", (4, 4))
        buf = io.BytesIO()
        img.save(buf, format="PNG")
        with pytest.raises(WrongBitDepth):
            load_depth_png(buf.getvalue())

    def test_garbage_rejected(self):
        with pytest.raises(DecodeError):
            load_depth_png(b"not a png at all")


class TestRelativeMotion:
    def test_matches_matrix_oracle(self):
        rng = np.random.default_rng(29)
        for _ in range(100):
            qa = UnitQuaternion.from_axis_angle(rng.normal(size=3),
                                                rng.uniform(0, 3))
            qb = UnitQuaternion.from_axis_angle(rng.normal(size=3),
                                                rng.uniform(0, 3))
            pa = RigidMotion(qa, rng.normal(size=3))
            pb = RigidMotion(qb, rng.normal(size=3))
            fa = AssociatedFrame(FrameRecord(0, "a"), FrameRecord(0, "a"),
                                 gt_pose=pa, gt_timestamp=0.0)
            fb = AssociatedFrame(FrameRecord(1, "b"), FrameRecord(1, "b"),
                                 gt_pose=pb, gt_timestamp=1.0)
            rel = relative_gt_motion(fa, fb)
            oracle = np.linalg.inv(pa.to_matrix()) @ pb.to_matrix()
            assert np.abs(rel.to_matrix() - oracle).max() < 1e-12

    def test_missing_gt(self):
        fa = AssociatedFrame(FrameRecord(0, "a"), FrameRecord(0, "a"))
        with pytest.raises(MissingGroundTruth):
            relative_gt_motion(fa, fa)


class TestIntrinsicsTable:
    def test_fr1_fr3(self):
        k1 = intrinsics_for_sequence("rgbd_dataset_freiburg1_xyz")
        assert (k1.fx, k1.fy, k1.cx, k1.cy) == (517.3, 516.5, 318.6, 255.3)
        k3 = intrinsics_for_sequence("fr3_walking_xyz")
        assert (k3.fx, k3.fy, k3.cx, k3.cy) == (535.4, 539.2, 320.1, 247.6)

    def test_unknown_falls_back(self):
        assert intrinsics_for_sequence("mystery") == \
            intrinsics_for_sequence("fr1_xyz")


class TestLoadSequence:
    def test_directory_fixture(self, tmp_path):
        root = tmp_path / "fr1_mini"
        (root / "depth").mkdir(parents=True)
        arr = np.full((480, 640), 5000, dtype=np.uint16)
        for ts in ("1.000000", "1.050000"):
            (root / "depth" / f"{ts}.png").write_bytes(png_bytes(arr))
        (root / "rgb.txt").write_text(
            "1.000000 rgb/1.000000.png\n1.050000 rgb/1.050000.png\n")
        (root / "depth.txt").write_text(
            "1.000000 depth/1.000000.png\n1.050000 depth/1.050000.png\n")
        (root / "groundtruth.txt").write_text(
            "1.000000 0 0 0 0 0 0 1\n1.050000 0.1 0 0 0 0 0 1\n")
        seq = load_sequence(root)
        assert len(seq.frames) == 2
        assert seq.intrinsics.fx == 517.3
        d = seq.load_depth(seq.frames[0])
        assert d.values[0, 0] == 1.0
        rel = relative_gt_motion(seq.frames[0], seq.frames[1])
        assert np.allclose(rel.translation, [0.1, 0, 0])
