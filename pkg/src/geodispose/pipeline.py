"""Incremental propose -> dispose -> integrate execution over frame pairs.

The trajectory is built online over non-overlapping pairs (0,s), (s,2s), ...
Evaluation sweeps may instead use all sliding pairs (i, i+s) to maximize
sample count; both schedules live here.
"""

from __future__ import annotations

import enum
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .core_geometry import RigidMotion, compose
from .depth_geometry import (CameraIntrinsics, DepthMap, backproject,
                             estimate_normals, subsample)
from .errors import DepthUnavailable, TooFewFrames
from .icp_disposal import (Disposition, IcpConfig, IcpResult, RejectReason,
                           Verdict, dispose, run_icp)
from .proposals import PoseProposal

log = logging.getLogger("geodispose.pipeline")


class FallbackPolicy(enum.Enum):
    IDENTITY = "identity"
    CONSTANT_VELOCITY = "constant-velocity"


@dataclass(frozen=True)
class FramePair:
    """One unit of work: two depth frames, their ids, and optional gt."""

    frame_a: str
    frame_b: str
    depth_a: DepthMap
    depth_b: DepthMap
    intrinsics: CameraIntrinsics
    stride: int = 1
    gt_motion: Optional[RigidMotion] = None


@dataclass(frozen=True)
class PairOutcome:
    pair: FramePair
    proposal: PoseProposal
    disposition: Disposition
    final_motion: RigidMotion
    fallback_used: bool

    def __post_init__(self):
        if self.fallback_used and self.disposition.verdict is Verdict.ACCEPTED:
            raise ValueError("fallback implies a rejected disposition")


@dataclass(frozen=True)
class TrajectoryEstimate:
    poses: tuple    # ((frame id, world pose RigidMotion), ...)
    outcomes: tuple


def prepare_cloud(depth: DepthMap, k: CameraIntrinsics, subsample_step: int = 1):
    pc = backproject(depth, k)
    pc = estimate_normals(pc, depth)
    if subsample_step > 1:
        pc = subsample(pc, subsample_step)
    return pc


def run_pair(pair: FramePair, proposal: PoseProposal,
             cfg: IcpConfig = IcpConfig(),
             fallback: FallbackPolicy = FallbackPolicy.IDENTITY,
             previous_motion: Optional[RigidMotion] = None,
             subsample_step: int = 1) -> PairOutcome:
    """Refine one proposal and dispose of it.

    The source cloud is the later frame (b), the target the earlier frame
    (a), so the recovered motion is invert(P_a) o P_b, directly comparable
    to the TUM ground-truth relative motion.
    """
    if pair.depth_a is None or pair.depth_b is None:
        raise DepthUnavailable(f"pair ({pair.frame_a}, {pair.frame_b})")
    target = prepare_cloud(pair.depth_a, pair.intrinsics)
    source = prepare_cloud(pair.depth_b, pair.intrinsics, subsample_step)
    result = run_icp(source, pair.depth_a, target, pair.intrinsics,
                     proposal.motion, cfg)
    if result.inlier_count == 0:
        # no valid overlap at all: uniform handling as too few correspondences
        disposition = Disposition(Verdict.REJECTED,
                                  RejectReason.TOO_FEW_CORRESPONDENCES, result)
    else:
        disposition = dispose(result, cfg)
    if disposition.verdict is Verdict.ACCEPTED:
        return PairOutcome(pair, proposal, disposition, result.motion, False)
    if fallback is FallbackPolicy.CONSTANT_VELOCITY and previous_motion is not None:
        substitute = previous_motion
    else:
        substitute = RigidMotion.identity()
    return PairOutcome(pair, proposal, disposition, substitute, True)


def trajectory_schedule(n_frames: int, stride: int):
    """Non-overlapping pairs (0,s), (s,2s), ... for trajectory building."""
    return [(i, i + stride) for i in range(0, n_frames - stride, stride)]


def sliding_schedule(n_frames: int, stride: int):
    """All pairs (i, i+s); default for evaluation statistics."""
    return [(i, i + stride) for i in range(n_frames - stride)]


def run_sequence(pair_provider: Callable[[int, int], FramePair],
                 proposal_provider: Callable[[FramePair], PoseProposal],
                 n_frames: int, stride: int,
                 cfg: IcpConfig = IcpConfig(),
                 fallback: FallbackPolicy = FallbackPolicy.IDENTITY,
                 subsample_step: int = 1) -> TrajectoryEstimate:
    """Online trajectory over non-overlapping strided pairs.

    pair_provider(i, j) materializes the FramePair for frame indices (i, j);
    proposal_provider maps a pair to its pose proposal. Processing is
    strictly sequential (no access to future frames).
    """
    if n_frames < stride + 1:
        raise TooFewFrames(f"{n_frames} frames < stride {stride} + 1")
    schedule = trajectory_schedule(n_frames, stride)
    poses = []
    outcomes = []
    world = RigidMotion.identity()
    previous_motion = None
    first = schedule[0][0]
    for i, j in schedule:
        pair = pair_provider(i, j)
        if not poses:
            poses.append((pair.frame_a, world))
        proposal = proposal_provider(pair)
        outcome = run_pair(pair, proposal, cfg, fallback, previous_motion,
                           subsample_step)
        outcomes.append(outcome)
        world = compose(world, outcome.final_motion)
        poses.append((pair.frame_b, world))
        if outcome.disposition.verdict is Verdict.ACCEPTED:
            previous_motion = outcome.final_motion
    return TrajectoryEstimate(poses=tuple(poses), outcomes=tuple(outcomes))


def evaluate_pairs(pair_provider: Callable[[int, int], FramePair],
                   proposal_provider: Callable[[FramePair], PoseProposal],
                   n_frames: int, stride: int,
                   cfg: IcpConfig = IcpConfig(),
                   fallback: FallbackPolicy = FallbackPolicy.IDENTITY,
                   workers: int = 1,
                   subsample_step: int = 1) -> list[PairOutcome]:
    """Independent outcomes over the sliding schedule (no cross-pair state).

    Parallel across pairs when workers > 1; results are always returned in
    schedule order, so aggregation is deterministic regardless of workers.
    """
    if n_frames < stride + 1:
        raise TooFewFrames(f"{n_frames} frames < stride {stride} + 1")
    schedule = sliding_schedule(n_frames, stride)

    def work(ij):
        pair = pair_provider(*ij)
        proposal = proposal_provider(pair)
        return run_pair(pair, proposal, cfg, fallback, None, subsample_step)

    if workers <= 1:
        return [work(ij) for ij in schedule]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(work, schedule))


def serialize_trajectory(traj: TrajectoryEstimate,
                         timestamps: Optional[dict] = None) -> str:
    """TUM trajectory text: `timestamp tx ty tz qx qy qz qw` per pose."""
    from .core_geometry import serialize_pose
    lines = []
    for idx, (frame_id, pose) in enumerate(traj.poses):
        if timestamps and frame_id in timestamps:
            ts = repr(float(timestamps[frame_id]))
        else:
            try:
                ts = repr(float(frame_id))
            except (TypeError, ValueError):
                ts = str(idx)
        lines.append(f"{ts} {serialize_pose(pose)}")
    return "\n".join(lines) + "\n"
