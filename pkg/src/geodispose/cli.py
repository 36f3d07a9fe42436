"""Experiment driver: sequences x strides x init modes x depth modes.

Subcommands:
  run             execute an experiment sweep, emit tables/logs/trajectories
  validate        sanity-check a TUM sequence directory
  render-fixtures render synthetic pairs to the interchange format
  compare         diff result files (or init columns) within tolerances

Exit codes: 0 ok, 1 config error, 2 data error, 3 runtime error.
Verbosity via the GEODISPOSE_LOG environment variable (DEBUG/INFO/...).
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from . import dataset_tum, evaluation, pipeline, proposals, synthetic_scenes
from .core_geometry import RigidMotion, Twist, se3_exp
from .depth_geometry import CameraIntrinsics
from .errors import GeodisposeError, ParseError, DecodeError, \
    MissingDepthFile, ManifestParse, EmptyAssociation
from .icp_disposal import IcpConfig, Objective

log = logging.getLogger("geodispose.cli")

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DATA = 2
EXIT_RUNTIME = 3

DATA_ERRORS = (ParseError, DecodeError, MissingDepthFile, ManifestParse,
               EmptyAssociation, FileNotFoundError)

# deterministic camera path for --synthetic: world pose of frame t is exp(t*xi)
SYNTH_STEP = Twist(np.radians([0.12, 0.30, 0.08]), [0.004, -0.002, 0.006])


def _setup_logging():
    level = os.environ.get("GEODISPOSE_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="geodispose", description=__doc__,
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment sweep")
    run.add_argument("--config", help="JSON config file; flags win over it")
    run.add_argument("--dataset", help="TUM dataset root directory")
    run.add_argument("--sequence", default=None,
                     help="sequence directory name under the dataset root")
    run.add_argument("--synthetic", action="store_true",
                     help="use the built-in synthetic corner scene")
    run.add_argument("--frames", type=int, default=18,
                     help="synthetic sequence length")
    run.add_argument("--strides", default="1,5,10,15")
    run.add_argument("--init", default="identity",
                     help="comma list from {identity,file,gt-perturbed}")
    run.add_argument("--depth", default=None,
                     help="comma list from {predicted,ground-truth}")
    run.add_argument("--manifest", help="proposal manifest (file/predicted modes)")
    run.add_argument("--objective", default="point-to-plane",
                     choices=["point-to-plane", "point-to-point"])
    run.add_argument("--residual-thresh", type=float, default=None)
    run.add_argument("--perturb-rot", type=float, default=5.0,
                     help="gt-perturbed rotation magnitude, degrees")
    run.add_argument("--perturb-trans", type=float, default=0.05,
                     help="gt-perturbed translation magnitude, meters")
    run.add_argument("--fallback", default="identity",
                     choices=["identity", "constant-velocity"])
    run.add_argument("--policy", default="with-fallback",
                     choices=["with-fallback", "accepted-only"])
    run.add_argument("--intrinsics", default=None,
                     help="override as fx,fy,cx,cy,width,height")
    run.add_argument("--subsample", type=int, default=4,
                     help="source-cloud pixel subsampling step")
    run.add_argument("--max-pairs", type=int, default=0,
                     help="cap evaluated pairs per cell (0 = all)")
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    run.add_argument("--out", default="results")

    val = sub.add_parser("validate", help="validate a TUM sequence directory")
    val.add_argument("path")
    val.add_argument("--tol", type=float,
                     default=dataset_tum.DEFAULT_ASSOCIATION_TOL)
    val.add_argument("--check-depth", type=int, default=5,
                     help="number of depth files to decode")

    rf = sub.add_parser("render-fixtures",
                        help="render synthetic pairs to manifest + rasters")
    rf.add_argument("--out", required=True)
    rf.add_argument("--frames", type=int, default=6)
    rf.add_argument("--strides", default="1")
    rf.add_argument("--seed", type=int, default=0)
    rf.add_argument("--noise", type=float, default=0.0)

    cmp_ = sub.add_parser("compare",
                          help="diff two result CSVs, or init columns of one")
    cmp_.add_argument("file_a")
    cmp_.add_argument("file_b", nargs="?")
    cmp_.add_argument("--rot-tol", type=float, default=0.2, help="degrees")
    cmp_.add_argument("--trans-tol", type=float, default=0.002, help="meters")
    return p


def _parse_intrinsics_flag(s: str) -> CameraIntrinsics:
    f = s.split(",")
    if len(f) != 6:
        raise ValueError("--intrinsics expects fx,fy,cx,cy,width,height")
    return CameraIntrinsics(fx=float(f[0]), fy=float(f[1]), cx=float(f[2]),
                            cy=float(f[3]), width=int(f[4]), height=int(f[5]))


def _merge_config_file(args):
    """Fill in defaults from --config JSON; explicit flags win."""
    if not args.config:
        return args
    cfg = json.loads(Path(args.config).read_text())
    argv_flags = {a.split("=")[0] for a in sys.argv if a.startswith("--")}
    for key, val in cfg.items():
        flag = "--" + key.replace("_", "-")
        if flag in argv_flags:
            continue
        if not hasattr(args, key):
            raise ValueError(f"unknown config key {key!r}")
        setattr(args, key, val)
    return args


def _synthetic_frames(n_frames: int):
    """World poses exp(t * SYNTH_STEP) along the deterministic camera path."""
    poses = []
    for t in range(n_frames):
        xi = Twist(SYNTH_STEP.omega * t, SYNTH_STEP.v * t)
        poses.append(se3_exp(xi))
    return poses


class SyntheticProvider:
    """Renders frames of the corner scene on demand, with caching."""

    def __init__(self, n_frames: int, noise: float = 0.0, seed: int = 0):
        self.scene = synthetic_scenes.ball_pit_scene(
            depth_noise_sigma=noise, seed=seed)
        self.poses = _synthetic_frames(n_frames)
        self.n_frames = n_frames
        self.intrinsics = self.scene.intrinsics
        self._cache = {}

    def frame_id(self, i: int) -> str:
        return f"{i:03d}"

    def depth(self, i: int):
        if i not in self._cache:
            scene = replace(self.scene, seed=self.scene.seed + i)
            self._cache[i] = synthetic_scenes.render_depth(scene, self.poses[i])
        return self._cache[i]

    def gt_motion(self, i: int, j: int) -> RigidMotion:
        from .core_geometry import compose, invert
        return compose(invert(self.poses[i]), self.poses[j])

    def pair(self, i: int, j: int, stride: int) -> pipeline.FramePair:
        return pipeline.FramePair(
            frame_a=self.frame_id(i), frame_b=self.frame_id(j),
            depth_a=self.depth(i), depth_b=self.depth(j),
            intrinsics=self.intrinsics, stride=stride,
            gt_motion=self.gt_motion(i, j))


class TumProvider:
    """Materializes FramePairs from an associated TUM sequence."""

    def __init__(self, seq: dataset_tum.TumSequence, depth_mode, manifest):
        self.seq = seq
        self.depth_mode = depth_mode
        self.manifest = manifest
        self.n_frames = len(seq.frames)
        self.intrinsics = seq.intrinsics

    def frame_id(self, i: int) -> str:
        return f"{self.seq.frames[i].rgb.timestamp:.6f}"

    def depth(self, i: int):
        frame = self.seq.frames[i]
        return proposals.get_depth(self.depth_mode, self.frame_id(i),
                                   self.intrinsics, manifest=self.manifest,
                                   dataset=self.seq, frame=frame)

    def gt_motion(self, i: int, j: int):
        a, b = self.seq.frames[i], self.seq.frames[j]
        if a.gt_pose is None or b.gt_pose is None:
            return None
        return dataset_tum.relative_gt_motion(a, b)

    def pair(self, i: int, j: int, stride: int) -> pipeline.FramePair:
        return pipeline.FramePair(
            frame_a=self.frame_id(i), frame_b=self.frame_id(j),
            depth_a=self.depth(i), depth_b=self.depth(j),
            intrinsics=self.intrinsics, stride=stride,
            gt_motion=self.gt_motion(i, j))


def _proposal_for(pair, init_mode, manifest, perturb_cfg):
    src = {"identity": proposals.ProposalSource.IDENTITY,
           "file": proposals.ProposalSource.FILE,
           "gt-perturbed": proposals.ProposalSource.GT_PERTURBED}[init_mode]
    return proposals.get_proposal(src, pair.frame_a, pair.frame_b,
                                  manifest=manifest, gt_motion=pair.gt_motion,
                                  perturb_cfg=perturb_cfg)


def cmd_run(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    strides = [int(s) for s in str(args.strides).split(",") if s]
    init_modes = [m.strip() for m in args.init.split(",") if m.strip()]
    if not strides or not init_modes:
        print("error: need at least one stride and one init mode",
              file=sys.stderr)
        return EXIT_CONFIG
    manifest = proposals.load_manifest(args.manifest) if args.manifest else None
    if "file" in init_modes and manifest is None:
        print("error: --init file requires --manifest", file=sys.stderr)
        return EXIT_CONFIG

    icp_cfg = IcpConfig(objective=Objective(args.objective))
    if args.residual_thresh is not None:
        icp_cfg = replace(icp_cfg, residual_accept_thresh=args.residual_thresh)
    perturb_cfg = proposals.PerturbationConfig(
        rot_deg=args.perturb_rot, trans_m=args.perturb_trans, seed=args.seed)
    fallback = pipeline.FallbackPolicy(args.fallback)
    policy = evaluation.InclusionPolicy(args.policy)

    if args.synthetic:
        sequence_name = "synthetic-corner"
        depth_modes = ["synthetic"]
        providers = {"synthetic": SyntheticProvider(args.frames, seed=args.seed)}
    else:
        if not args.dataset or not args.sequence:
            print("error: need --dataset and --sequence (or --synthetic)",
                  file=sys.stderr)
            return EXIT_CONFIG
        sequence_name = args.sequence
        override = (_parse_intrinsics_flag(args.intrinsics)
                    if args.intrinsics else None)
        seq = dataset_tum.load_sequence(Path(args.dataset) / args.sequence,
                                        intrinsics=override)
        depth_modes = ([m.strip() for m in args.depth.split(",")]
                       if args.depth else ["ground-truth"])
        providers = {}
        for dm in depth_modes:
            src = (proposals.DepthSource.PREDICTED if dm == "predicted"
                   else proposals.DepthSource.GROUND_TRUTH)
            if src is proposals.DepthSource.PREDICTED and manifest is None:
                print("error: --depth predicted requires --manifest",
                      file=sys.stderr)
                return EXIT_CONFIG
            providers[dm] = TumProvider(seq, src, manifest)

    # provenance header: every threshold and intrinsic value in effect
    k = next(iter(providers.values())).intrinsics
    provenance = {
        "sequence": sequence_name, "strides": strides, "init": init_modes,
        "depth": depth_modes, "seed": args.seed,
        "intrinsics": asdict(k),
        "icp": {**{f.name: getattr(icp_cfg, f.name)
                   for f in icp_cfg.__dataclass_fields__.values()
                   if f.name != "objective"},
                "objective": icp_cfg.objective.value},
        "perturbation": asdict(perturb_cfg),
        "fallback": fallback.value, "policy": policy.value,
        "subsample": args.subsample, "max_pairs": args.max_pairs,
    }
    print(json.dumps(provenance, indent=2, sort_keys=True))
    (out / "config.json").write_text(
        json.dumps(provenance, indent=2, sort_keys=True) + "\n")

    summaries = []
    for dm, provider in providers.items():
        for stride in strides:
            n_frames = provider.n_frames
            if args.max_pairs > 0:
                n_frames = min(n_frames, args.max_pairs + stride)
            for init_mode in init_modes:
                outcomes = pipeline.evaluate_pairs(
                    lambda i, j, s=stride: provider.pair(i, j, s),
                    lambda pr: _proposal_for(pr, init_mode, manifest,
                                             perturb_cfg),
                    n_frames, stride, icp_cfg, fallback,
                    workers=args.workers, subsample_step=args.subsample)
                summaries.append(evaluation.summarize(
                    outcomes, sequence_name, stride, init_mode, dm, policy))
                tag = f"{dm}_s{stride}_{init_mode}"
                (out / f"pairs_{tag}.tsv").write_text(
                    evaluation.per_pair_log(outcomes, init_mode))
                traj = pipeline.run_sequence(
                    lambda i, j, s=stride: provider.pair(i, j, s),
                    lambda pr: _proposal_for(pr, init_mode, manifest,
                                             perturb_cfg),
                    n_frames, stride, icp_cfg, fallback,
                    subsample_step=args.subsample)
                (out / f"traj_{tag}.txt").write_text(
                    pipeline.serialize_trajectory(traj))

    table = evaluation.emit_table(summaries)
    (out / "results.txt").write_text(table)
    (out / "results.csv").write_text(evaluation.to_csv(summaries))
    print(table)
    print(f"artifacts written to {out}/")
    return EXIT_OK


def cmd_validate(args) -> int:
    root = Path(args.path)
    problems = []
    try:
        rgb = dataset_tum.parse_index_file((root / "rgb.txt").read_text())
        depth = dataset_tum.parse_index_file((root / "depth.txt").read_text())
    except (OSError, ParseError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA
    gt = None
    if (root / "groundtruth.txt").exists():
        gt = dataset_tum.parse_groundtruth((root / "groundtruth.txt").read_text())
    try:
        frames = dataset_tum.associate(rgb, depth, gt, args.tol)
    except EmptyAssociation as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA
    drop = 1.0 - len(frames) / max(len(rgb), len(depth))
    for frame in frames[:args.check_depth]:
        path = root / frame.depth.path
        try:
            dataset_tum.load_depth_png(path.read_bytes())
        except (OSError, GeodisposeError) as e:
            problems.append(f"{path}: {e}")
    print(f"rgb records:   {len(rgb)}")
    print(f"depth records: {len(depth)}")
    print(f"gt poses:      {len(gt) if gt else 0}")
    print(f"associated:    {len(frames)} pairs (drop rate {drop:.1%})")
    if problems:
        for pb in problems:
            print(f"FAIL {pb}", file=sys.stderr)
        return EXIT_DATA
    print(f"OK, {len(frames)} pairs")
    return EXIT_OK


def cmd_render_fixtures(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    provider = SyntheticProvider(args.frames, noise=args.noise, seed=args.seed)
    entries = []
    k = provider.intrinsics
    for i in range(args.frames):
        rel = f"depth_{provider.frame_id(i)}.gddf"
        proposals.write_gddf(out / rel, provider.depth(i).values)
    for stride in (int(s) for s in str(args.strides).split(",") if s):
        for i, j in pipeline.sliding_schedule(args.frames, stride):
            entries.append(proposals.ManifestEntry(
                frame_a=provider.frame_id(i), frame_b=provider.frame_id(j),
                pose=provider.gt_motion(i, j),
                depth_a=f"depth_{provider.frame_id(i)}.gddf",
                depth_b=f"depth_{provider.frame_id(j)}.gddf",
                pred_intrinsics=k))
    manifest_path = out / "proposals.manifest"
    proposals.write_manifest(manifest_path, "synthetic-corner", entries)
    print(f"wrote {len(entries)} entries to {manifest_path}")
    return EXIT_OK


def cmd_compare(args) -> int:
    a = evaluation.parse_csv(Path(args.file_a).read_text())
    if args.file_b:
        b = evaluation.parse_csv(Path(args.file_b).read_text())
        index_b = {(s.sequence, s.stride, s.depth_mode, s.init_mode): s
                   for s in b}
        pairs = [(s, index_b.get((s.sequence, s.stride, s.depth_mode,
                                  s.init_mode))) for s in a]
        label = f"{args.file_a} vs {args.file_b}"
    else:
        # single file: compare init-mode columns against each other per cell
        by_cell = {}
        for s in a:
            by_cell.setdefault((s.sequence, s.stride, s.depth_mode), []).append(s)
        pairs = []
        for cell, group in sorted(by_cell.items()):
            group.sort(key=lambda s: s.init_mode)
            for other in group[1:]:
                pairs.append((group[0], other))
        label = f"init columns of {args.file_a}"

    worst_rot = worst_trans = 0.0
    failures = 0
    for s, t in pairs:
        if t is None:
            print(f"MISSING {s.sequence} stride {s.stride} {s.init_mode}")
            failures += 1
            continue
        d_rot = max(abs(s.rot_mean - t.rot_mean), abs(s.rot_p95 - t.rot_p95))
        d_trans = max(abs(s.trans_mean - t.trans_mean),
                      abs(s.trans_p95 - t.trans_p95))
        worst_rot = max(worst_rot, d_rot)
        worst_trans = max(worst_trans, d_trans)
        ok = d_rot <= args.rot_tol and d_trans <= args.trans_tol
        status = "ok  " if ok else "FAIL"
        print(f"{status} {s.sequence} stride {s.stride:>2} "
              f"{s.init_mode}~{t.init_mode}: "
              f"d_rot={d_rot:.4f} deg d_trans={d_trans:.5f} m")
        failures += 0 if ok else 1
    print(f"compared {label}: worst d_rot={worst_rot:.4f} deg, "
          f"worst d_trans={worst_trans:.5f} m, "
          f"{failures} cell(s) out of tolerance")
    return EXIT_OK if failures == 0 else EXIT_RUNTIME


def main(argv=None) -> int:
    _setup_logging()
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_CONFIG if e.code not in (0, None) else EXIT_OK
    try:
        if args.command == "run":
            args = _merge_config_file(args)
            return cmd_run(args)
        if args.command == "validate":
            return cmd_validate(args)
        if args.command == "render-fixtures":
            return cmd_render_fixtures(args)
        return cmd_compare(args)
    except (ValueError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except DATA_ERRORS as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA
    except GeodisposeError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
