"""Post-export verification: re-read every raster a manifest references.

Checks the GDDF header magic, declared vs. actual dimensions, and that all
stored values are finite (a NaN is reported with its flat pixel index).
Summarizes the valid-depth range per referenced frame.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .formats import GDDF_MAGIC, MANIFEST_HEADER
from .tum import ExportError


@dataclass
class VerifyReport:
    manifest: Path
    pairs: int = 0
    rasters_checked: int = 0
    failures: list = field(default_factory=list)
    depth_ranges: dict = field(default_factory=dict)  # raster -> (min, max) m

    @property
    def ok(self) -> bool:
        return not self.failures

    def render(self) -> str:
        lines = [f"manifest: {self.manifest}",
                 f"pairs: {self.pairs}",
                 f"rasters checked: {self.rasters_checked}"]
        for rel in sorted(self.depth_ranges):
            lo, hi = self.depth_ranges[rel]
            lines.append(f"  {rel}: depth range [{lo:.4f}, {hi:.4f}] m")
        for f in self.failures:
            lines.append(f"FAIL {f}")
        lines.append("OK" if self.ok else f"{len(self.failures)} failure(s)")
        return "\n".join(lines) + "\n"


def _check_raster(path: Path, report: VerifyReport) -> None:
    rel = path.name
    try:
        data = path.read_bytes()
    except OSError as e:
        report.failures.append(f"{path}: unreadable: {e}")
        return
    if len(data) < 16 or data[:4] != GDDF_MAGIC:
        report.failures.append(f"{path}: bad GDDF magic")
        return
    w, h, stored_scale = struct.unpack("<IIf", data[4:16])
    if len(data) != 16 + 4 * w * h:
        report.failures.append(
            f"{path}: payload {len(data) - 16} bytes != {4 * w * h} "
            f"expected for {w}x{h}")
        return
    values = np.frombuffer(data[16:], dtype="<f4")
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        report.failures.append(
            f"{path}: non-finite value at pixel index {int(bad[0])} "
            f"({bad.size} total)")
        return
    report.rasters_checked += 1
    valid = values[values > 0.0] * stored_scale
    if valid.size:
        report.depth_ranges[rel] = (float(valid.min()), float(valid.max()))
    else:
        report.depth_ranges[rel] = (0.0, 0.0)


def verify(manifest_path) -> VerifyReport:
    """Re-read a manifest and all rasters it references."""
    manifest_path = Path(manifest_path)
    report = VerifyReport(manifest=manifest_path)
    try:
        lines = manifest_path.read_text().splitlines()
    except OSError as e:
        raise ExportError(f"cannot read manifest: {e}") from None
    if not lines or lines[0].strip() != MANIFEST_HEADER:
        report.failures.append(
            f"{manifest_path}: missing header {MANIFEST_HEADER!r}")
        return report
    seen = set()
    for i, line in enumerate(lines[1:], start=2):
        if not line.strip() or line.startswith("#"):
            continue
        fields = line.split("\t")
        if len(fields) != 17:
            report.failures.append(
                f"{manifest_path}:{i}: expected 17 fields, got {len(fields)}")
            continue
        report.pairs += 1
        for rel in (fields[9], fields[10]):
            if rel in seen:
                continue
            seen.add(rel)
            _check_raster(manifest_path.parent / rel, report)
    return report
