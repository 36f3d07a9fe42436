"""ICP refinement of a proposed relative motion, with explicit accept/reject.

Given a pose hypothesis for the motion from frame A (source) to frame B
(target), `run_icp` alternates projective data association with a robust
Gauss-Newton step, and `dispose` turns the result into an Accepted or
Rejected verdict. The rejection path is the point: hypotheses that geometry
cannot reconcile are discarded instead of absorbed.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .core_geometry import RigidMotion, Twist, compose, se3_exp, skew
from .depth_geometry import CameraIntrinsics, DepthMap, PointCloud, project
from .errors import DegenerateSystem

CONDITION_LIMIT = 1e12


class Objective(enum.Enum):
    POINT_TO_PLANE = "point-to-plane"
    POINT_TO_POINT = "point-to-point"


class Verdict(enum.Enum):
    ACCEPTED = "Accepted"
    REJECTED = "Rejected"


class RejectReason(enum.Enum):
    NONE = "None"
    NO_CONVERGENCE = "NoConvergence"
    RESIDUAL_TOO_HIGH = "ResidualTooHigh"
    TOO_FEW_CORRESPONDENCES = "TooFewCorrespondences"


@dataclass(frozen=True)
class IcpConfig:
    max_iterations: int = 30
    translation_eps: float = 1e-5     # meters, per-step
    rotation_eps: float = 1e-3        # degrees, per-step
    max_correspondence_dist: float = 0.10   # meters
    normal_angle_max: float = 60.0    # degrees
    residual_accept_thresh: float = 0.03    # meters (rmse)
    min_correspondences: int = 200
    objective: Objective = Objective.POINT_TO_PLANE

    def __post_init__(self):
        for name in ("max_iterations", "translation_eps", "rotation_eps",
                     "max_correspondence_dist", "normal_angle_max",
                     "residual_accept_thresh", "min_correspondences"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class IcpResult:
    motion: RigidMotion
    rmse: float
    inlier_count: int
    iterations: int
    converged: bool
    cost_log: tuple = ()   # per-iteration robust cost, for monotonicity checks


@dataclass(frozen=True)
class Disposition:
    verdict: Verdict
    reason: RejectReason
    result: IcpResult

    def __post_init__(self):
        accepted = self.verdict is Verdict.ACCEPTED
        if accepted != (self.reason is RejectReason.NONE):
            raise ValueError("Accepted iff reason is None")


def projective_associate(source: PointCloud, target_depth: DepthMap,
                         target_pc: PointCloud, k: CameraIntrinsics,
                         T: RigidMotion, cfg: IcpConfig) -> np.ndarray:
    """Associate by projecting transformed source points into the target raster.

    Returns an (M, 2) integer array of (source idx, target idx). Pairs are
    pruned when the point distance exceeds max_correspondence_dist, either
    normal is invalid, or the normals disagree by more than normal_angle_max.
    """
    src_idx = np.flatnonzero(source.valid & source.normal_valid)
    if src_idx.size == 0:
        return np.empty((0, 2), dtype=int)
    R = T.rotation.to_matrix()
    p = source.points[src_idx] @ R.T + T.translation
    u, v, in_front = project(p, k)
    ui = np.rint(u).astype(int)
    vi = np.rint(v).astype(int)
    inside = (in_front & (ui >= 0) & (ui < target_pc.width)
              & (vi >= 0) & (vi < target_pc.height))
    src_idx = src_idx[inside]
    if src_idx.size == 0:
        return np.empty((0, 2), dtype=int)
    p = p[inside]
    tgt_idx = vi[inside] * target_pc.width + ui[inside]

    ok = target_pc.valid[tgt_idx] & target_pc.normal_valid[tgt_idx]
    q = target_pc.points[tgt_idx]
    dist = np.linalg.norm(q - p, axis=1)
    ok &= dist <= cfg.max_correspondence_dist

    n_src = source.normals[src_idx] @ R.T
    n_tgt = target_pc.normals[tgt_idx]
    cos_max = math.cos(math.radians(cfg.normal_angle_max))
    ok &= np.einsum("ij,ij->i", n_src, n_tgt) >= cos_max

    return np.stack([src_idx[ok], tgt_idx[ok]], axis=1)


def _residuals(corrs, source, target, T, objective):
    """Residuals at the current pose: signed scalar (plane) or (M,3) (point)."""
    R = T.rotation.to_matrix()
    p = source.points[corrs[:, 0]] @ R.T + T.translation
    q = target.points[corrs[:, 1]]
    if objective is Objective.POINT_TO_PLANE:
        n = target.normals[corrs[:, 1]]
        return np.einsum("ij,ij->i", n, q - p), p, q, n
    return q - p, p, q, None


# Floor on the MAD scale (meters). Near convergence on clean data the MAD
# collapses toward zero and unflooored trimming would keep only one residual
# cluster (e.g. a single plane), degenerating the system; real outliers are
# orders of magnitude above 0.1 mm.
MAD_FLOOR = 1e-4


def _mad_weights(r_scalar: np.ndarray) -> np.ndarray:
    """Hard 3xMAD trimming: zero weight beyond 3 median absolute deviations."""
    med = np.median(r_scalar)
    mad = np.median(np.abs(r_scalar - med))
    return (np.abs(r_scalar - med) <= 3.0 * max(mad, MAD_FLOOR)).astype(float)


def _mad_weights_upper(r_norm: np.ndarray) -> np.ndarray:
    """One-sided 3xMAD trimming for nonnegative residual norms.

    Centered trimming would throw away the smallest (best-aligned) residuals
    whenever the median is large; only the upper tail holds outliers here.
    """
    med = np.median(r_norm)
    mad = np.median(np.abs(r_norm - med))
    return (r_norm <= med + 3.0 * max(mad, MAD_FLOOR)).astype(float)


def build_normal_equations(corrs, source, target, T: RigidMotion,
                           objective: Objective):
    """Assemble (A, b, weights) of the 6x6 system A xi = b at the current pose.

    Linearization of T <- exp(xi) o T with xi = (omega, v): a transformed
    point p' moves by omega x p' + v. Point-to-plane rows are
    [(p' x n)^T, n^T] with scalar residual n.(q - p'); point-to-point
    contributes three rows per pair. Rows are weighted by 3xMAD trimming of
    the current residuals.
    """
    if objective is Objective.POINT_TO_PLANE:
        r, p, q, n = _residuals(corrs, source, target, T, objective)
        w = _mad_weights(r)
        J = np.concatenate([np.cross(p, n), n], axis=1)  # (M, 6)
        A = (J * w[:, None]).T @ J
        b = (J * w[:, None]).T @ r
        return A, b, w
    e, p, q, _ = _residuals(corrs, source, target, T, objective)
    w = _mad_weights_upper(np.linalg.norm(e, axis=1))
    m = p.shape[0]
    # e(xi) ~ e0 + [p']x omega - v, so J = [-[p']x, I] gives e ~ e0 - J xi
    J = np.zeros((m, 3, 6))
    for i in range(m):
        J[i, :, :3] = -skew(p[i])
        J[i, :, 3:] = np.eye(3)
    Jf = J.reshape(-1, 6)
    ef = e.reshape(-1)
    wf = np.repeat(w, 3)
    A = (Jf * wf[:, None]).T @ Jf
    b = (Jf * wf[:, None]).T @ ef
    return A, b, w


def solve_step(corrs, source: PointCloud, target: PointCloud,
               T: RigidMotion, objective: Objective) -> Twist:
    """One Gauss-Newton step of the selected objective, as a twist update."""
    A, b, _ = build_normal_equations(corrs, source, target, T, objective)
    cond = np.linalg.cond(A)
    if not np.isfinite(cond) or cond > CONDITION_LIMIT:
        raise DegenerateSystem(cond)
    xi = np.linalg.solve(A, b)
    return Twist(xi[:3], xi[3:])


def robust_cost(corrs, source, target, T, objective) -> float:
    """Trimmed sum of squared residuals at the given pose."""
    if corrs.shape[0] == 0:
        return 0.0
    r, _, _, _ = _residuals(corrs, source, target, T, objective)
    if objective is Objective.POINT_TO_POINT:
        scal = np.linalg.norm(r, axis=1)
        w = _mad_weights_upper(scal)
        return float(np.sum(w * scal**2))
    w = _mad_weights(r)
    return float(np.sum(w * r**2))


def _final_rmse(corrs, source, target, T, objective):
    """RMSE over every association survivor at the final pose.

    The MAD trim is a solver device; disposal must see the misalignment of
    everything inside the gated overlap, otherwise a wrong pose that
    self-aligns a majority cluster would hide its outliers and be accepted.
    """
    if corrs.shape[0] == 0:
        return 0.0, 0
    r, _, _, _ = _residuals(corrs, source, target, T, objective)
    scal = np.linalg.norm(r, axis=1) if objective is Objective.POINT_TO_POINT else r
    return float(np.sqrt(np.mean(scal ** 2))), int(corrs.shape[0])


def run_icp(source: PointCloud, target_depth: DepthMap, target_pc: PointCloud,
            k: CameraIntrinsics, init: RigidMotion,
            cfg: IcpConfig = IcpConfig()) -> IcpResult:
    """Iterate associate -> solve -> update until the step is below epsilon.

    converged means the epsilon test stopped the loop; hitting the iteration
    cap, running out of correspondences, or a degenerate system all report
    converged=False.
    """
    T = init
    converged = False
    iterations = 0
    cost_log = []
    corrs = np.empty((0, 2), dtype=int)
    for it in range(cfg.max_iterations):
        corrs = projective_associate(source, target_depth, target_pc, k, T, cfg)
        if corrs.shape[0] < 6:
            break
        try:
            xi = solve_step(corrs, source, target_pc, T, cfg.objective)
        except DegenerateSystem:
            break
        iterations = it + 1
        rot_step = math.degrees(float(np.linalg.norm(xi.omega)))
        trans_step = float(np.linalg.norm(xi.v))
        if rot_step < cfg.rotation_eps and trans_step < cfg.translation_eps:
            # sub-epsilon update: stop without applying, so a true fixed
            # point is left exactly unchanged
            converged = True
            cost_log.append(robust_cost(corrs, source, target_pc, T,
                                        cfg.objective))
            break
        T = compose(se3_exp(xi), T)
        cost_log.append(robust_cost(corrs, source, target_pc, T, cfg.objective))
    # associate once more at the final pose for the reported residual
    corrs = projective_associate(source, target_depth, target_pc, k, T, cfg)
    rmse, inliers = _final_rmse(corrs, source, target_pc, T, cfg.objective)
    return IcpResult(motion=T, rmse=rmse, inlier_count=inliers,
                     iterations=iterations, converged=converged,
                     cost_log=tuple(cost_log))


def dispose(result: IcpResult, cfg: IcpConfig = IcpConfig()) -> Disposition:
    """Accept/reject verdict; precedence NoConvergence > TooFew > Residual."""
    if not result.converged:
        reason = RejectReason.NO_CONVERGENCE
    elif result.inlier_count < cfg.min_correspondences:
        reason = RejectReason.TOO_FEW_CORRESPONDENCES
    elif result.rmse > cfg.residual_accept_thresh:
        reason = RejectReason.RESIDUAL_TOO_HIGH
    else:
        reason = RejectReason.NONE
    verdict = Verdict.ACCEPTED if reason is RejectReason.NONE else Verdict.REJECTED
    return Disposition(verdict=verdict, reason=reason, result=result)
