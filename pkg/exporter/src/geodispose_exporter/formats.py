"""Writers for the interchange formats consumed by the pipeline.

Manifest: UTF-8 text, header `geodispose-proposals v1`, one tab-separated
record per pair (frame_a frame_b tx ty tz qx qy qz qw depth_a depth_b
fx fy cx cy width height). Floats serialize via repr so bit patterns
survive the text round trip.

GDDF raster: magic `GDDF`, u32 width, u32 height, f32 scale-to-meters,
then width*height little-endian float32 values in row-major order;
values <= 0 are invalid.

All writes are atomic per file (temp file + rename).
"""

from __future__ import annotations

import os
import struct
import tempfile
from pathlib import Path

import numpy as np

MANIFEST_HEADER = "geodispose-proposals v1"
GDDF_MAGIC = b"GDDF"


def _atomic_write_bytes(path, data: bytes) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_gddf(path, values: np.ndarray, scale: float = 1.0) -> None:
    """Write a GDDF raster; meters = stored float32 value * scale."""
    values = np.ascontiguousarray(values, dtype="<f4")
    h, w = values.shape
    _atomic_write_bytes(path, GDDF_MAGIC + struct.pack("<IIf", w, h, scale)
                        + values.tobytes())


def manifest_record(frame_a: str, frame_b: str, pose_fields: list,
                    depth_a: str, depth_b: str, intrinsics) -> str:
    """One manifest line. pose_fields: 7 pre-serialized strings
    (tx ty tz qx qy qz qw); intrinsics: (fx, fy, cx, cy, width, height)."""
    fx, fy, cx, cy, width, height = intrinsics
    return "\t".join([frame_a, frame_b, *pose_fields, depth_a, depth_b,
                      repr(float(fx)), repr(float(fy)),
                      repr(float(cx)), repr(float(cy)),
                      str(int(width)), str(int(height))])


def write_manifest(path, sequence: str, records: list) -> None:
    lines = [MANIFEST_HEADER, f"# sequence: {sequence}", *records]
    _atomic_write_bytes(path, ("\n".join(lines) + "\n").encode("utf-8"))
