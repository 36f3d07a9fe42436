"""Relative-pose and depth proposal sources.

Three pose sources mirror the compared configurations: identity, interchange
files (learned proposals exported by an external tool), and ground-truth
relative motions perturbed by a seeded random twist of exact magnitude.

Interchange formats (language-neutral, stream-friendly):
  manifest  — UTF-8 text, header line `geodispose-proposals v1`, then one
              tab-separated record per pair:
              frame_a frame_b tx ty tz qx qy qz qw depth_a depth_b
              fx fy cx cy width height
  raster    — GDDF binary: magic `GDDF`, u32 width, u32 height,
              f32 scale-to-meters, then width*height float32 row-major
              values (little-endian). value <= 0 means invalid.
"""

from __future__ import annotations

import enum
import logging
import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .core_geometry import (RigidMotion, Twist, compose, deserialize_pose,
                            se3_exp, serialize_pose)
from .dataset_tum import AssociatedFrame, relative_gt_motion
from .depth_geometry import CameraIntrinsics, DepthMap, align_depth_to_intrinsics
from .errors import (BadQuaternion, ManifestParse, MissingDepthFile,
                     MissingEntry, MissingGroundTruth)

log = logging.getLogger("geodispose.proposals")

MANIFEST_HEADER = "geodispose-proposals v1"
GDDF_MAGIC = b"GDDF"


class ProposalSource(enum.Enum):
    IDENTITY = "Identity"
    FILE = "File"
    GT_PERTURBED = "GtPerturbed"


class DepthSource(enum.Enum):
    PREDICTED = "Predicted"
    GROUND_TRUTH = "GroundTruth"


@dataclass(frozen=True)
class PoseProposal:
    motion: RigidMotion
    source: ProposalSource
    confidence: Optional[float] = None

    def __post_init__(self):
        if self.confidence is not None and not 0.0 <= self.confidence <= 1.0:
            raise ValueError("confidence must be in [0, 1]")


@dataclass(frozen=True)
class PerturbationConfig:
    """Exact-magnitude perturbation of a ground-truth relative motion."""

    rot_deg: float = 0.0
    trans_m: float = 0.0
    seed: int = 0


@dataclass(frozen=True)
class ManifestEntry:
    frame_a: str
    frame_b: str
    pose: RigidMotion
    depth_a: str
    depth_b: str
    pred_intrinsics: CameraIntrinsics


@dataclass(frozen=True)
class ProposalManifest:
    sequence: str
    entries: tuple
    root: Path

    def entry_for(self, frame_a: str, frame_b: str) -> ManifestEntry:
        for e in self.entries:
            if e.frame_a == frame_a and e.frame_b == frame_b:
                return e
        raise MissingEntry(f"no manifest entry for pair ({frame_a}, {frame_b})")

    def depth_path(self, rel: str) -> Path:
        return self.root / rel


def write_gddf(path, values: np.ndarray, scale: float = 1.0) -> None:
    """Write a GDDF raster; values stored as float32, meters = value * scale."""
    values = np.ascontiguousarray(values, dtype="<f4")
    h, w = values.shape
    with open(path, "wb") as f:
        f.write(GDDF_MAGIC)
        f.write(struct.pack("<IIf", w, h, scale))
        f.write(values.tobytes())


def read_gddf(path, intrinsics: Optional[CameraIntrinsics] = None) -> DepthMap:
    data = Path(path).read_bytes()
    if len(data) < 16 or data[:4] != GDDF_MAGIC:
        raise ManifestParse(f"{path}: bad GDDF magic")
    w, h, scale = struct.unpack("<IIf", data[4:16])
    expected = 16 + 4 * w * h
    if len(data) != expected:
        raise ManifestParse(f"{path}: size {len(data)} != expected {expected}")
    raw = np.frombuffer(data[16:], dtype="<f4").reshape(h, w)
    values = raw * scale if scale != 1.0 else raw
    values = np.where(raw > 0.0, values, 0.0)
    return DepthMap(w, h, values, source_intrinsics=intrinsics)


def _parse_intrinsics(fields) -> CameraIntrinsics:
    fx, fy, cx, cy = (float(x) for x in fields[:4])
    width, height = int(fields[4]), int(fields[5])
    return CameraIntrinsics(fx=fx, fy=fy, cx=cx, cy=cy,
                            width=width, height=height)


def load_manifest(path) -> ProposalManifest:
    """Parse and validate a proposal manifest; referenced rasters must exist."""
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except OSError as e:
        raise ManifestParse(f"cannot read manifest: {e}") from None
    if not lines or lines[0].strip() != MANIFEST_HEADER:
        raise ManifestParse(f"missing header {MANIFEST_HEADER!r}")
    sequence = path.stem
    entries = []
    for i, line in enumerate(lines[1:], start=2):
        line = line.rstrip("\n")
        if not line.strip() or line.startswith("#"):
            if line.startswith("# sequence:"):
                sequence = line.split(":", 1)[1].strip()
            continue
        fields = line.split("\t")
        if len(fields) != 17:
            raise ManifestParse(f"line {i}: expected 17 fields, got {len(fields)}")
        try:
            pose_fields = [float(x) for x in fields[2:9]]
        except ValueError:
            raise ManifestParse(f"line {i}: non-numeric pose field") from None
        qn = math.sqrt(sum(x * x for x in pose_fields[3:7]))
        if abs(qn - 1.0) > 1e-3:
            raise BadQuaternion(f"line {i}: quaternion norm {qn:.6f}")
        if abs(qn - 1.0) > 1e-12:
            log.info("line %d: renormalizing quaternion (norm %.2e off unit)",
                     i, abs(qn - 1.0))
        pose = deserialize_pose(pose_fields)
        entry = ManifestEntry(
            frame_a=fields[0], frame_b=fields[1], pose=pose,
            depth_a=fields[9], depth_b=fields[10],
            pred_intrinsics=_parse_intrinsics(fields[11:17]))
        for rel in (entry.depth_a, entry.depth_b):
            if not (path.parent / rel).exists():
                raise MissingDepthFile(str(path.parent / rel))
        entries.append(entry)
    return ProposalManifest(sequence=sequence, entries=tuple(entries),
                            root=path.parent)


def write_manifest(path, sequence: str, entries) -> None:
    """Serialize manifest entries; inverse of load_manifest."""
    lines = [MANIFEST_HEADER, f"# sequence: {sequence}"]
    for e in entries:
        k = e.pred_intrinsics
        pose = serialize_pose(e.pose).split(" ")
        lines.append("\t".join([
            e.frame_a, e.frame_b, *pose, e.depth_a, e.depth_b,
            repr(k.fx), repr(k.fy), repr(k.cx), repr(k.cy),
            str(k.width), str(k.height)]))
    Path(path).write_text("\n".join(lines) + "\n")


def pair_seed(seed: int, frame_a: str, frame_b: str) -> np.random.Generator:
    """Deterministic per-pair RNG: SeedSequence over the base seed and ids.

    Frame ids enter as their UTF-8 bytes so any exporter in any language can
    reproduce the stream.
    """
    ids = [int.from_bytes(frame_a.encode("utf-8"), "big"),
           int.from_bytes(frame_b.encode("utf-8"), "big")]
    return np.random.default_rng(np.random.SeedSequence([seed, *ids]))


def perturb_motion(gt: RigidMotion, cfg: PerturbationConfig,
                   frame_a: str, frame_b: str) -> RigidMotion:
    """gt o exp(xi) with exactly cfg.rot_deg rotation and cfg.trans_m shift.

    Axis and direction are drawn uniformly on the sphere from the per-pair
    RNG; magnitudes are exact by construction so perturbation size is an
    experiment parameter, not a random variable.
    """
    rng = pair_seed(cfg.seed, frame_a, frame_b)
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    direction = rng.normal(size=3)
    direction /= np.linalg.norm(direction)
    xi = Twist(axis * math.radians(cfg.rot_deg), direction * cfg.trans_m)
    return compose(gt, se3_exp(xi))


def get_proposal(source_mode: ProposalSource,
                 frame_a_id: str, frame_b_id: str,
                 manifest: Optional[ProposalManifest] = None,
                 gt_motion: Optional[RigidMotion] = None,
                 perturb_cfg: Optional[PerturbationConfig] = None) -> PoseProposal:
    """Produce the pose proposal for a pair under the selected source."""
    if source_mode is ProposalSource.IDENTITY:
        return PoseProposal(RigidMotion.identity(), ProposalSource.IDENTITY)
    if source_mode is ProposalSource.FILE:
        if manifest is None:
            raise MissingEntry("File mode requires a manifest")
        entry = manifest.entry_for(frame_a_id, frame_b_id)
        return PoseProposal(entry.pose, ProposalSource.FILE)
    if gt_motion is None:
        raise MissingGroundTruth("GtPerturbed mode requires gt for both frames")
    cfg = perturb_cfg or PerturbationConfig()
    return PoseProposal(perturb_motion(gt_motion, cfg, frame_a_id, frame_b_id),
                        ProposalSource.GT_PERTURBED)


def get_depth(source_mode: DepthSource, frame_id: str,
              eval_intrinsics: CameraIntrinsics,
              manifest: Optional[ProposalManifest] = None,
              dataset=None, frame: Optional[AssociatedFrame] = None) -> DepthMap:
    """Fetch the depth raster for a frame under the selected depth source.

    Predicted rasters are aligned to the evaluation intrinsics; dataset
    (ground-truth) rasters are returned as decoded.
    """
    if source_mode is DepthSource.GROUND_TRUTH:
        if dataset is None or frame is None:
            raise MissingEntry("GroundTruth depth mode requires a dataset frame")
        return dataset.load_depth(frame)
    if manifest is None:
        raise MissingEntry("Predicted depth mode requires a manifest")
    for e in manifest.entries:
        if e.frame_a == frame_id:
            rel, k = e.depth_a, e.pred_intrinsics
            break
        if e.frame_b == frame_id:
            rel, k = e.depth_b, e.pred_intrinsics
            break
    else:
        raise MissingEntry(f"no manifest depth for frame {frame_id}")
    d = read_gddf(manifest.depth_path(rel), intrinsics=k)
    return align_depth_to_intrinsics(d, k, eval_intrinsics)
