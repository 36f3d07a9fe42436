"""Proposals are suggestions; geometry has the last word.

Feeds the same refinement stage two kinds of pose proposals:
  1. mildly wrong ones (5 deg / 5 cm off the truth) on a high-overlap pair —
     all are pulled back to the same answer and accepted;
  2. badly wrong ones (30 deg off) on a low-overlap pair with a strict
     residual threshold — all are rejected and the fallback motion is used.
"""

import numpy as np

from geodispose import IcpConfig, Twist, se3_exp
from geodispose.core_geometry import motion_delta
from geodispose.icp_disposal import Verdict
from geodispose.pipeline import FramePair, run_pair
from geodispose.proposals import (PerturbationConfig, ProposalSource,
                                  get_proposal)
from geodispose import synthetic_scenes as scenes


def run_batch(scene, motion, perturb, cfg, n_seeds):
    depth_a, depth_b, gt = scenes.make_pair(scene, motion)
    pair = FramePair("a", "b", depth_a, depth_b, scene.intrinsics,
                     gt_motion=gt)
    accepted = rejected = 0
    worst = 0.0
    for seed in range(n_seeds):
        prop = get_proposal(
            ProposalSource.GT_PERTURBED, "a", "b", gt_motion=gt,
            perturb_cfg=PerturbationConfig(perturb[0], perturb[1], seed))
        out = run_pair(pair, prop, cfg)
        if out.disposition.verdict is Verdict.ACCEPTED:
            accepted += 1
            rot, _ = motion_delta(out.final_motion, gt)
            worst = max(worst, rot)
        else:
            rejected += 1
    return accepted, rejected, worst


def main():
    scene = scenes.ball_pit_scene()

    small = se3_exp(Twist(np.radians([0.5, 1.5, 0.3]), [0.012, 0.0, 0.015]))
    acc, rej, worst = run_batch(scene, small, (5.0, 0.05), IcpConfig(), 20)
    print("high-overlap pair, proposals 5 deg / 5 cm off:")
    print(f"  accepted {acc}/20, rejected {rej}/20, "
          f"worst accepted rotation error {worst:.4f} deg")

    big = se3_exp(Twist(np.radians([0.0, 42.0, 0.0]), [0.35, 0.0, 0.1]))
    strict = IcpConfig(residual_accept_thresh=0.005)
    acc, rej, _ = run_batch(scene, big, (30.0, 0.05), strict, 20)
    print("low-overlap pair, proposals 30 deg off, strict residual gate:")
    print(f"  accepted {acc}/20, rejected {rej}/20 "
          "(rejected pairs fall back to the identity motion)")


if __name__ == "__main__":
    main()
