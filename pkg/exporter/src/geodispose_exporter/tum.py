"""Minimal TUM RGB-D sequence reading for export jobs.

Implements the standard layout (rgb.txt / depth.txt / groundtruth.txt,
16-bit depth PNGs) and the conventional greedy nearest-timestamp
association with a 0.02 s tolerance, matching the consumer pipeline's
published association rule so both sides agree on frame identity.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
from PIL import Image

from .se3 import quat_canonical

ASSOCIATION_TOL = 0.02
DEPTH_DIVISOR = 5000.0

INTRINSICS_TABLE = {
    "fr1": (517.3, 516.5, 318.6, 255.3, 640, 480),
    "fr3": (535.4, 539.2, 320.1, 247.6, 640, 480),
}


class ExportError(Exception):
    """Fatal export problem; the message names the offending file/model."""


@dataclass(frozen=True)
class Frame:
    frame_id: str           # rgb timestamp rendered as %.6f
    rgb_ts: float
    rgb_path: str
    depth_path: str
    gt: Optional[tuple]     # (quaternion, translation) or None


def intrinsics_for_sequence(name: str):
    for key, k in INTRINSICS_TABLE.items():
        if key in name:
            return k
    return INTRINSICS_TABLE["fr1"]


def _parse_index(path: Path):
    records = []
    for i, line in enumerate(path.read_text().splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ExportError(f"{path}:{i}: expected 'timestamp path'")
        records.append((float(parts[0]), parts[1]))
    records.sort()
    return records


def _parse_groundtruth(path: Path):
    poses = []
    for i, line in enumerate(path.read_text().splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 8:
            raise ExportError(f"{path}:{i}: expected 8 fields")
        vals = [float(p) for p in parts]
        q = quat_canonical(vals[4], vals[5], vals[6], vals[7])
        poses.append((vals[0], (q, np.array(vals[1:4]))))
    return poses


def _greedy_match(a_times, b_times, tol=ASSOCIATION_TOL):
    candidates = []
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


def load_frames(root) -> list:
    """Associated frames of a TUM sequence directory, gt attached when near."""
    root = Path(root)
    rgb = _parse_index(root / "rgb.txt")
    depth = _parse_index(root / "depth.txt")
    gt_path = root / "groundtruth.txt"
    gt = _parse_groundtruth(gt_path) if gt_path.exists() else []

    rgb_times = [t for t, _ in rgb]
    pairs = _greedy_match(rgb_times, [t for t, _ in depth])
    gt_for_rgb = {}
    if gt:
        for i, j in _greedy_match(rgb_times, [t for t, _ in gt]):
            gt_for_rgb[i] = gt[j][1]

    frames = []
    for i, j in pairs:
        ts, rgb_path = rgb[i]
        frames.append(Frame(frame_id=f"{ts:.6f}", rgb_ts=ts,
                            rgb_path=rgb_path, depth_path=depth[j][1],
                            gt=gt_for_rgb.get(i)))
    return frames


def load_depth_meters(root, frame: Frame,
                      divisor: float = DEPTH_DIVISOR) -> np.ndarray:
    """Decode a 16-bit depth PNG to float32 meters (0 = invalid)."""
    path = Path(root) / frame.depth_path
    try:
        img = Image.open(io.BytesIO(path.read_bytes()))
        img.load()
    except Exception as e:
        raise ExportError(f"cannot decode depth image {path}: {e}") from None
    if img.mode not in ("I", "I;16", "I;16B", "I;16L"):
        raise ExportError(f"{path}: expected 16-bit depth, got {img.mode}")
    raw = np.asarray(img, dtype=np.uint32)
    return (raw / divisor).astype(np.float32)
