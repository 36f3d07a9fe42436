"""TUM RGB-D sequence ingestion.

Handles the standard layout: `rgb.txt` / `depth.txt` index files,
`groundtruth.txt` trajectory, and 16-bit depth PNGs under `depth/`.
"""

from __future__ import annotations

import io
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
from PIL import Image, UnidentifiedImageError

from .core_geometry import RigidMotion, UnitQuaternion, compose, invert
from .depth_geometry import CameraIntrinsics, DepthMap
from .errors import (DecodeError, EmptyAssociation, MissingGroundTruth,
                     NonUnitQuaternion, ParseError, WrongBitDepth)

log = logging.getLogger("geodispose.dataset")

DEFAULT_ASSOCIATION_TOL = 0.02  # seconds; conventional for 30 Hz TUM streams
DEFAULT_DEPTH_DIVISOR = 5000.0  # TUM 16-bit depth encoding: raw/5000 = meters

# Per-sequence-family intrinsics defaults (overridable via CLI flag).
INTRINSICS_TABLE = {
    "fr1": CameraIntrinsics(fx=517.3, fy=516.5, cx=318.6, cy=255.3,
                            width=640, height=480),
    "fr3": CameraIntrinsics(fx=535.4, fy=539.2, cx=320.1, cy=247.6,
                            width=640, height=480),
}


def intrinsics_for_sequence(name: str) -> CameraIntrinsics:
    """Look up default intrinsics from a sequence name like 'fr1_xyz'."""
    for key, k in INTRINSICS_TABLE.items():
        if key in name:
            return k
    log.warning("no intrinsics entry matches sequence %r, using fr1 defaults", name)
    return INTRINSICS_TABLE["fr1"]


@dataclass(frozen=True)
class FrameRecord:
    timestamp: float
    path: str


@dataclass(frozen=True)
class AssociatedFrame:
    rgb: FrameRecord
    depth: FrameRecord
    gt_pose: Optional[RigidMotion] = None
    gt_timestamp: Optional[float] = None


def parse_index_file(text: str) -> list[FrameRecord]:
    """Parse a TUM `rgb.txt`/`depth.txt` index: lines `timestamp path`."""
    records = []
    for i, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ParseError(i, f"expected 'timestamp path', got {line!r}")
        try:
            ts = float(parts[0])
        except ValueError:
            raise ParseError(i, f"bad timestamp {parts[0]!r}") from None
        if not math.isfinite(ts):
            raise ParseError(i, f"non-finite timestamp {parts[0]!r}")
        records.append(FrameRecord(ts, parts[1]))
    timestamps = [r.timestamp for r in records]
    if any(b <= a for a, b in zip(timestamps, timestamps[1:])):
        log.warning("index timestamps not strictly increasing; re-sorting")
        records.sort(key=lambda r: r.timestamp)
    return records


def parse_groundtruth(text: str) -> list[tuple[float, RigidMotion]]:
    """Parse `groundtruth.txt`: lines `timestamp tx ty tz qx qy qz qw`.

    Poses are camera-to-world. Quaternions renormalized; norms off by more
    than 1e-2 are rejected.
    """
    poses = []
    for i, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 8:
            raise ParseError(i, f"expected 8 fields, got {len(parts)}")
        try:
            vals = [float(p) for p in parts]
        except ValueError:
            raise ParseError(i, f"non-numeric field in {line!r}") from None
        qx, qy, qz, qw = vals[4:8]
        norm = math.sqrt(qx * qx + qy * qy + qz * qz + qw * qw)
        if abs(norm - 1.0) > 1e-2:
            raise NonUnitQuaternion(
                f"line {i}: quaternion norm {norm:.6f} deviates > 1e-2")
        pose = RigidMotion(UnitQuaternion(qx, qy, qz, qw), np.array(vals[1:4]))
        poses.append((vals[0], pose))
    return poses


def _greedy_match(a_times, b_times, tol):
    """All pairs within tol, best |dt| first, each index used at most once."""
    candidates = []
    j0 = 0
    for i, ta in enumerate(a_times):
        for j, tb in enumerate(b_times):
            dt = abs(ta - tb)
            if dt <= tol:
                candidates.append((dt, i, j))
    candidates.sort()
    used_a, used_b = set(), set()
    matches = []
    for dt, i, j in candidates:
        if i in used_a or j in used_b:
            continue
        used_a.add(i)
        used_b.add(j)
        matches.append((i, j))
    matches.sort()
    return matches


def associate(rgb: list[FrameRecord], depth: list[FrameRecord],
              gt: Optional[list[tuple[float, RigidMotion]]] = None,
              tol: float = DEFAULT_ASSOCIATION_TOL) -> list[AssociatedFrame]:
    """Greedy nearest-timestamp matching between rgb and depth indices.

    Ground truth, when given, is attached by the same nearest rule keyed on
    the rgb timestamp; frames without gt within tol keep gt_pose = None.
    """
    rgb_times = [r.timestamp for r in rgb]
    depth_times = [d.timestamp for d in depth]
    pairs = _greedy_match(rgb_times, depth_times, tol)
    if not pairs:
        raise EmptyAssociation("no rgb/depth pairs within tolerance")

    gt_for_rgb = {}
    if gt:
        gt_times = [t for t, _ in gt]
        for i, j in _greedy_match(rgb_times, gt_times, tol):
            gt_for_rgb[i] = gt[j]

    frames = []
    for i, j in pairs:
        gt_entry = gt_for_rgb.get(i)
        frames.append(AssociatedFrame(
            rgb=rgb[i], depth=depth[j],
            gt_pose=gt_entry[1] if gt_entry else None,
            gt_timestamp=gt_entry[0] if gt_entry else None))
    return frames


def load_depth_png(data: bytes, scale_divisor: float = DEFAULT_DEPTH_DIVISOR,
                   intrinsics: Optional[CameraIntrinsics] = None) -> DepthMap:
    """Decode a TUM 16-bit depth PNG: meters = raw / scale_divisor, 0 = invalid."""
    try:
        img = Image.open(io.BytesIO(data))
        img.load()
    except (UnidentifiedImageError, OSError) as e:
        raise DecodeError(f"cannot decode depth image: {e}") from None
    if img.mode not in ("I", "I;16", "I;16B", "I;16L"):
        raise WrongBitDepth(f"expected 16-bit single-channel image, got {img.mode}")
    raw = np.asarray(img, dtype=np.uint32)
    if raw.ndim != 2:
        raise WrongBitDepth(f"expected single channel, got shape {raw.shape}")
    if raw.max(initial=0) > 65535:
        raise WrongBitDepth("pixel values exceed 16-bit range")
    values = raw.astype(np.float64) / float(scale_divisor)
    return DepthMap(width=raw.shape[1], height=raw.shape[0], values=values,
                    source_intrinsics=intrinsics)


def relative_gt_motion(frame_i: AssociatedFrame,
                       frame_j: AssociatedFrame) -> RigidMotion:
    """Ground-truth relative motion invert(P_i) o P_j, in camera-i frame."""
    if frame_i.gt_pose is None or frame_j.gt_pose is None:
        raise MissingGroundTruth("both frames must carry ground-truth poses")
    return compose(invert(frame_i.gt_pose), frame_j.gt_pose)


@dataclass(frozen=True)
class TumSequence:
    """An associated TUM sequence rooted at a directory."""

    root: Path
    frames: list[AssociatedFrame]
    intrinsics: CameraIntrinsics
    depth_divisor: float = DEFAULT_DEPTH_DIVISOR

    def load_depth(self, frame: AssociatedFrame) -> DepthMap:
        data = (self.root / frame.depth.path).read_bytes()
        return load_depth_png(data, self.depth_divisor, self.intrinsics)


def load_sequence(root, intrinsics: Optional[CameraIntrinsics] = None,
                  tol: float = DEFAULT_ASSOCIATION_TOL,
                  depth_divisor: float = DEFAULT_DEPTH_DIVISOR) -> TumSequence:
    """Load and associate a TUM sequence directory."""
    root = Path(root)
    rgb = parse_index_file((root / "rgb.txt").read_text())
    depth = parse_index_file((root / "depth.txt").read_text())
    gt_file = root / "groundtruth.txt"
    gt = parse_groundtruth(gt_file.read_text()) if gt_file.exists() else None
    frames = associate(rgb, depth, gt, tol)
    if intrinsics is None:
        intrinsics = intrinsics_for_sequence(root.name)
    return TumSequence(root=root, frames=frames, intrinsics=intrinsics,
                       depth_divisor=depth_divisor)
