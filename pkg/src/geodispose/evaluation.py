"""Relative pose error (RPE) computation and per-cell aggregation.

One summary cell is a (sequence, stride, init mode, depth mode) tuple with
mean and 95th-percentile rotational (degrees) and translational (meters)
errors, matching the structure of the result tables. ATE is deliberately
absent: no global scale is estimated.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .core_geometry import RigidMotion, compose, invert, rotation_angle_deg
from .errors import EmptySamples, MissingGroundTruth, NoSamples
from .icp_disposal import Verdict
from .pipeline import PairOutcome

CSV_HEADER = ("sequence,stride,init,depth,n,rot_mean_deg,rot_p95_deg,"
              "trans_mean_m,trans_p95_m,rejected")


class InclusionPolicy(enum.Enum):
    WITH_FALLBACK = "with-fallback"    # rejected pairs enter with their fallback motion
    ACCEPTED_ONLY = "accepted-only"


@dataclass(frozen=True)
class RpeSample:
    frame_a: str
    frame_b: str
    rot_err: float    # degrees
    trans_err: float  # meters

    def __post_init__(self):
        if not (np.isfinite(self.rot_err) and np.isfinite(self.trans_err)):
            raise ValueError("errors must be finite")
        if self.rot_err < 0 or self.trans_err < 0:
            raise ValueError("errors must be >= 0")


@dataclass(frozen=True)
class RpeSummary:
    sequence: str
    stride: int
    init_mode: str
    depth_mode: str
    n: int
    rot_mean: float
    rot_p95: float
    trans_mean: float
    trans_p95: float
    rejected_count: int


def rpe(est: RigidMotion, gt: RigidMotion) -> tuple[float, float]:
    """(rotation error deg, translation error m) of E = invert(gt) o est."""
    e = compose(invert(gt), est)
    return rotation_angle_deg(e), float(np.linalg.norm(e.translation))


def percentile_95(samples) -> float:
    """Linear-interpolation percentile: rank r = 0.95*(n-1) on sorted data."""
    vals = np.asarray(list(samples), dtype=float)
    if vals.size == 0:
        raise EmptySamples("percentile of empty sample list")
    vals = np.sort(vals)
    r = 0.95 * (vals.size - 1)
    lo = int(np.floor(r))
    hi = int(np.ceil(r))
    frac = r - lo
    return float(vals[lo] * (1.0 - frac) + vals[hi] * frac)


def samples_from_outcomes(outcomes,
                          policy: InclusionPolicy = InclusionPolicy.WITH_FALLBACK
                          ) -> list[RpeSample]:
    """RPE samples for outcomes that carry ground truth.

    Pairs without gt are skipped (they never enter RPE denominators);
    accepted-only drops rejected pairs entirely, with-fallback scores the
    substituted motion.
    """
    samples = []
    for o in outcomes:
        if o.pair.gt_motion is None:
            continue
        if (policy is InclusionPolicy.ACCEPTED_ONLY
                and o.disposition.verdict is not Verdict.ACCEPTED):
            continue
        rot, trans = rpe(o.final_motion, o.pair.gt_motion)
        samples.append(RpeSample(o.pair.frame_a, o.pair.frame_b, rot, trans))
    return samples


def summarize(outcomes, sequence: str, stride: int, init_mode: str,
              depth_mode: str,
              policy: InclusionPolicy = InclusionPolicy.WITH_FALLBACK
              ) -> RpeSummary:
    samples = samples_from_outcomes(outcomes, policy)
    if not samples:
        raise NoSamples(f"no RPE samples for {sequence} stride {stride} "
                        f"under policy {policy.value}")
    rot = [s.rot_err for s in samples]
    trans = [s.trans_err for s in samples]
    rejected = sum(1 for o in outcomes
                   if o.disposition.verdict is Verdict.REJECTED)
    return RpeSummary(
        sequence=sequence, stride=stride, init_mode=init_mode,
        depth_mode=depth_mode, n=len(samples),
        rot_mean=float(np.mean(rot)), rot_p95=percentile_95(rot),
        trans_mean=float(np.mean(trans)), trans_p95=percentile_95(trans),
        rejected_count=rejected)


def to_csv(summaries) -> str:
    """Machine-readable companion table, full float precision."""
    lines = [CSV_HEADER]
    for s in summaries:
        lines.append(",".join([
            s.sequence, str(s.stride), s.init_mode, s.depth_mode, str(s.n),
            repr(s.rot_mean), repr(s.rot_p95),
            repr(s.trans_mean), repr(s.trans_p95), str(s.rejected_count)]))
    return "\n".join(lines) + "\n"


def parse_csv(text: str) -> list[RpeSummary]:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != CSV_HEADER:
        raise ValueError("unrecognized results header")
    out = []
    for ln in lines[1:]:
        f = ln.split(",")
        out.append(RpeSummary(
            sequence=f[0], stride=int(f[1]), init_mode=f[2], depth_mode=f[3],
            n=int(f[4]), rot_mean=float(f[5]), rot_p95=float(f[6]),
            trans_mean=float(f[7]), trans_p95=float(f[8]),
            rejected_count=int(f[9])))
    return out


def emit_table(summaries) -> str:
    """Human-readable table: rows (sequence, stride), column group per init.

    Values render to 3 decimals; the CSV companion keeps full precision.
    """
    init_modes = sorted({s.init_mode for s in summaries})
    rows = sorted({(s.sequence, s.stride, s.depth_mode) for s in summaries})
    cell = {(s.sequence, s.stride, s.depth_mode, s.init_mode): s
            for s in summaries}

    header = ["Sequence", "Stride", "Depth"]
    for m in init_modes:
        header += [f"{m} rot mean", f"{m} rot P95",
                   f"{m} trans mean", f"{m} trans P95"]
    table = [header]
    for seq, stride, depth in rows:
        row = [seq, str(stride), depth]
        for m in init_modes:
            s = cell.get((seq, stride, depth, m))
            if s is None:
                row += ["-"] * 4
            else:
                row += [f"{s.rot_mean:.3f}", f"{s.rot_p95:.3f}",
                        f"{s.trans_mean:.3f}", f"{s.trans_p95:.3f}"]
        table.append(row)

    widths = [max(len(r[c]) for r in table) for c in range(len(header))]
    lines = ["  ".join(v.ljust(w) for v, w in zip(r, widths)).rstrip()
             for r in table]
    lines.insert(1, "-" * max(len(ln) for ln in lines))
    lines.append("rot in degrees, trans in meters; mean / 95th percentile")
    return "\n".join(lines) + "\n"


def per_pair_log(outcomes, init_mode: str) -> str:
    """One machine-readable diagnostic line per pair."""
    lines = ["pair_a\tpair_b\tinit\titerations\trmse\tinliers\tverdict\treason"]
    for o in outcomes:
        r = o.disposition.result
        lines.append("\t".join([
            o.pair.frame_a, o.pair.frame_b, init_mode,
            str(r.iterations), repr(r.rmse), str(r.inlier_count),
            o.disposition.verdict.value, o.disposition.reason.value]))
    return "\n".join(lines) + "\n"
