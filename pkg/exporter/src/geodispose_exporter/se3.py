"""Self-contained rigid-motion arithmetic for the interchange convention.

The proposal pipeline defines pose perturbation operationally: a per-pair
random stream seeded from (seed, utf-8 frame ids), an exact-magnitude twist,
the closed-form se(3) exponential, and right-composition onto the
ground-truth motion. This module reproduces that arithmetic — including
operation order, small-angle branches, and the w >= 0 quaternion convention
— so that exported poses match the consumer's internally generated ones to
the last bit. It deliberately has no dependency on the consumer package.

Quaternions are (x, y, z, w) tuples; translations are float64 arrays.
"""

from __future__ import annotations

import math

import numpy as np

SMALL_ANGLE = 1e-8


def quat_canonical(x: float, y: float, z: float, w: float):
    """Renormalize only when measurably off unit; canonicalize to w >= 0."""
    n = math.sqrt(x**2 + y**2 + z**2 + w**2)
    if n == 0.0 or not math.isfinite(n):
        raise ValueError("quaternion norm must be finite and nonzero")
    if abs(n - 1.0) > 1e-12:
        x, y, z, w = x / n, y / n, z / n, w / n
    if w < 0.0:
        x, y, z, w = -x, -y, -z, -w
    return (x, y, z, w)


def quat_multiply(a, b):
    ax, ay, az, aw = a
    bx, by, bz, bw = b
    return quat_canonical(
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
        aw * bw - ax * bx - ay * by - az * bz,
    )


def quat_conjugate(q):
    x, y, z, w = q
    return quat_canonical(-x, -y, -z, w)


def quat_rotate(q, p):
    p = np.asarray(p, dtype=float)
    qv = np.array([q[0], q[1], q[2]])
    t = 2.0 * np.cross(qv, p)
    return p + q[3] * t + np.cross(qv, t)


def quat_from_rotvec(omega):
    omega = np.asarray(omega, dtype=float)
    theta = float(np.linalg.norm(omega))
    if theta < SMALL_ANGLE:
        k = 0.5 - theta * theta / 48.0
        return quat_canonical(omega[0] * k, omega[1] * k, omega[2] * k,
                              math.cos(theta / 2.0))
    k = math.sin(theta / 2.0) / theta
    return quat_canonical(omega[0] * k, omega[1] * k, omega[2] * k,
                          math.cos(theta / 2.0))


def _skew(v):
    v = np.asarray(v, dtype=float)
    return np.array([
        [0.0, -v[2], v[1]],
        [v[2], 0.0, -v[0]],
        [-v[1], v[0], 0.0],
    ])


def _left_jacobian(omega):
    theta = float(np.linalg.norm(omega))
    W = _skew(omega)
    if theta < SMALL_ANGLE:
        return np.eye(3) + 0.5 * W + (W @ W) / 6.0
    a = (1.0 - math.cos(theta)) / (theta * theta)
    b = (theta - math.sin(theta)) / (theta ** 3)
    return np.eye(3) + a * W + b * (W @ W)


def se3_exp(omega, v):
    """Closed-form exponential: returns (quaternion, translation)."""
    q = quat_from_rotvec(omega)
    t = _left_jacobian(np.asarray(omega, dtype=float)) @ np.asarray(v,
                                                                    dtype=float)
    return q, t


def compose(qa, ta, qb, tb):
    """(a o b): rotation a.b, translation a.rotate(t_b) + t_a."""
    return quat_multiply(qa, qb), quat_rotate(qa, tb) + np.asarray(ta,
                                                                   dtype=float)


def invert(q, t):
    qc = quat_conjugate(q)
    return qc, -quat_rotate(qc, np.asarray(t, dtype=float))


def relative_motion(qa, ta, qb, tb):
    """invert(pose_a) o pose_b, both camera-to-world."""
    qi, ti = invert(qa, ta)
    return compose(qi, ti, qb, tb)


def pair_rng(seed: int, frame_a: str, frame_b: str) -> np.random.Generator:
    """The interchange per-pair stream: SeedSequence over seed and utf-8 ids."""
    ids = [int.from_bytes(frame_a.encode("utf-8"), "big"),
           int.from_bytes(frame_b.encode("utf-8"), "big")]
    return np.random.default_rng(np.random.SeedSequence([seed, *ids]))


def perturb(q, t, rot_deg: float, trans_m: float, seed: int,
            frame_a: str, frame_b: str):
    """gt o exp(xi): exact rotation magnitude, exact twist translation."""
    rng = pair_rng(seed, frame_a, frame_b)
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    direction = rng.normal(size=3)
    direction /= np.linalg.norm(direction)
    qe, te = se3_exp(axis * math.radians(rot_deg), direction * trans_m)
    return compose(q, t, qe, te)


def serialize_pose(q, t) -> list:
    """Text fields in `tx ty tz qx qy qz qw` order, repr full precision."""
    vals = [float(t[0]), float(t[1]), float(t[2]),
            float(q[0]), float(q[1]), float(q[2]), float(q[3])]
    return [repr(v) for v in vals]
