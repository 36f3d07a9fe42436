"""Export jobs: turn a TUM sequence into an interchange manifest + rasters.

Two modes:
  gt-synth   — synthesize pose proposals from the sequence's ground-truth
               trajectory, optionally perturbed by the seeded exact-magnitude
               twist the consumer pipeline uses internally. Depth rasters are
               the sensor depth converted to GDDF float32, unmodified (no
               scaling, no filtering — any alignment is the consumer's job).
  <model-id> — import a prediction plugin by module name and write its
               predicted poses and depth rasters. Missing plugin is fatal
               with the model id named.

A provenance sidecar (provenance.txt) records the mode/model id, checkpoint
hash, preprocessing, seed, and perturbation magnitudes of every export.
"""

from __future__ import annotations

import importlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import formats, se3, tum
from .tum import ExportError

GT_SYNTH = "gt-synth"


@dataclass(frozen=True)
class ExportJob:
    sequence_root: Path
    out_dir: Path
    strides: tuple = (1,)
    mode: str = GT_SYNTH              # gt-synth or a model plugin module name
    rot_deg: float = 0.0              # gt-synth perturbation magnitudes
    trans_m: float = 0.0
    seed: int = 0
    intrinsics: Optional[tuple] = None  # (fx, fy, cx, cy, width, height)

    def __post_init__(self):
        object.__setattr__(self, "sequence_root", Path(self.sequence_root))
        object.__setattr__(self, "out_dir", Path(self.out_dir))
        object.__setattr__(self, "strides",
                           tuple(int(s) for s in self.strides))
        if not self.strides or any(s < 1 for s in self.strides):
            raise ValueError("strides must be a non-empty list of ints >= 1")
        if not self.mode:
            raise ValueError("mode must be gt-synth or a model id")


def _load_model(model_id: str):
    """Import a prediction plugin. The plugin module must expose
    predict(root, frame_a, frame_b) -> (pose7, depth_a, depth_b, intrinsics6)
    and may expose checkpoint_hash() and preprocessing()."""
    try:
        return importlib.import_module(model_id)
    except ImportError as e:
        raise ExportError(f"model {model_id!r} unavailable: {e}") from None


def _pair_schedule(n_frames: int, strides) -> list:
    pairs = []
    for stride in strides:
        pairs.extend((i, i + stride) for i in range(n_frames - stride))
    return pairs


def _provenance(job: ExportJob, model, n_records: int) -> str:
    if job.mode == GT_SYNTH:
        ckpt, prep = "n/a", "sensor depth PNG -> GDDF float32, unmodified"
    else:
        ckpt = (model.checkpoint_hash() if hasattr(model, "checkpoint_hash")
                else "unknown")
        prep = (model.preprocessing() if hasattr(model, "preprocessing")
                else "unspecified")
    return "".join(f"{k}: {v}\n" for k, v in [
        ("model", job.mode), ("checkpoint", ckpt), ("preprocessing", prep),
        ("sequence", job.sequence_root.name),
        ("strides", ",".join(str(s) for s in job.strides)),
        ("seed", job.seed),
        ("perturb_rot_deg", job.rot_deg), ("perturb_trans_m", job.trans_m),
        ("pairs", n_records)])


def export(job: ExportJob) -> Path:
    """Run an export job; returns the manifest path."""
    frames = tum.load_frames(job.sequence_root)
    if not frames:
        raise ExportError(f"{job.sequence_root}: no associated frames")
    k = job.intrinsics or tum.intrinsics_for_sequence(job.sequence_root.name)
    job.out_dir.mkdir(parents=True, exist_ok=True)

    model = None if job.mode == GT_SYNTH else _load_model(job.mode)
    records = []
    written = set()

    def write_raster(frame: tum.Frame, values: np.ndarray) -> str:
        rel = f"depth_{frame.frame_id}.gddf"
        if rel not in written:
            formats.write_gddf(job.out_dir / rel, values)
            written.add(rel)
        return rel

    for i, j in _pair_schedule(len(frames), job.strides):
        fa, fb = frames[i], frames[j]
        if job.mode == GT_SYNTH:
            if fa.gt is None or fb.gt is None:
                continue
            q, t = se3.relative_motion(*fa.gt, *fb.gt)
            q, t = se3.perturb(q, t, job.rot_deg, job.trans_m, job.seed,
                               fa.frame_id, fb.frame_id)
            rel_a = write_raster(fa, tum.load_depth_meters(job.sequence_root, fa))
            rel_b = write_raster(fb, tum.load_depth_meters(job.sequence_root, fb))
            pair_k = k
        else:
            pose7, depth_a, depth_b, pair_k = model.predict(
                job.sequence_root, fa, fb)
            q = se3.quat_canonical(*pose7[3:7])
            t = np.array(pose7[:3], dtype=float)
            rel_a = write_raster(fa, np.asarray(depth_a, dtype=np.float32))
            rel_b = write_raster(fb, np.asarray(depth_b, dtype=np.float32))
        records.append(formats.manifest_record(
            fa.frame_id, fb.frame_id, se3.serialize_pose(q, t),
            rel_a, rel_b, pair_k))

    if not records:
        raise ExportError("no exportable pairs (missing ground truth?)")
    manifest_path = job.out_dir / "proposals.manifest"
    formats.write_manifest(manifest_path, job.sequence_root.name, records)
    (job.out_dir / "provenance.txt").write_text(
        _provenance(job, model, len(records)))
    return manifest_path
