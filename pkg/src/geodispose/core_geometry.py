"""SE(3)/SO(3) arithmetic: unit quaternions, rigid motions, exp/log maps.

Rotations are stored as unit quaternions (canonical sign w >= 0) and only
materialized as 3x3 matrices where a solver needs them. All values are
immutable after construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import AngleAtPi

# Below this rotation angle the exp/log closed forms switch to their
# Taylor series to avoid division by ~0.
SMALL_ANGLE = 1e-8

# se3_log refuses rotations this close to pi (branch ambiguous).
PI_MARGIN = 1e-6


@dataclass(frozen=True)
class UnitQuaternion:
    """Unit quaternion (x, y, z, w), canonicalized to w >= 0."""

    x: float
    y: float
    z: float
    w: float

    def __post_init__(self):
        n = math.sqrt(self.x**2 + self.y**2 + self.z**2 + self.w**2)
        if n == 0.0 or not math.isfinite(n):
            raise ValueError("quaternion norm must be finite and nonzero")
        x, y, z, w = self.x, self.y, self.z, self.w
        # Renormalize only when measurably off: exact round-trips through
        # serialization must not perturb bit patterns.
        if abs(n - 1.0) > 1e-12:
            x, y, z, w = x / n, y / n, z / n, w / n
        if w < 0.0:
            x, y, z, w = -x, -y, -z, -w
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "w", w)

    @staticmethod
    def identity() -> "UnitQuaternion":
        return UnitQuaternion(0.0, 0.0, 0.0, 1.0)

    @staticmethod
    def from_axis_angle(axis, angle: float) -> "UnitQuaternion":
        axis = np.asarray(axis, dtype=float)
        n = float(np.linalg.norm(axis))
        if n == 0.0:
            return UnitQuaternion.identity()
        axis = axis / n
        s = math.sin(angle / 2.0)
        return UnitQuaternion(axis[0] * s, axis[1] * s, axis[2] * s,
                              math.cos(angle / 2.0))

    @staticmethod
    def from_rotvec(omega) -> "UnitQuaternion":
        """Exponential map so(3) -> SO(3)."""
        omega = np.asarray(omega, dtype=float)
        theta = float(np.linalg.norm(omega))
        if theta < SMALL_ANGLE:
            # sin(t/2)/t ~ 1/2 - t^2/48
            k = 0.5 - theta * theta / 48.0
            return UnitQuaternion(omega[0] * k, omega[1] * k, omega[2] * k,
                                  math.cos(theta / 2.0))
        k = math.sin(theta / 2.0) / theta
        return UnitQuaternion(omega[0] * k, omega[1] * k, omega[2] * k,
                              math.cos(theta / 2.0))

    @staticmethod
    def from_matrix(R) -> "UnitQuaternion":
        """Shepperd's method: pick the largest diagonal pivot for stability."""
        R = np.asarray(R, dtype=float)
        t = np.trace(R)
        if t > 0.0:
            s = math.sqrt(t + 1.0) * 2.0
            w = 0.25 * s
            x = (R[2, 1] - R[1, 2]) / s
            y = (R[0, 2] - R[2, 0]) / s
            z = (R[1, 0] - R[0, 1]) / s
        elif R[0, 0] >= R[1, 1] and R[0, 0] >= R[2, 2]:
            s = math.sqrt(1.0 + R[0, 0] - R[1, 1] - R[2, 2]) * 2.0
            w = (R[2, 1] - R[1, 2]) / s
            x = 0.25 * s
            y = (R[0, 1] + R[1, 0]) / s
            z = (R[0, 2] + R[2, 0]) / s
        elif R[1, 1] >= R[2, 2]:
            s = math.sqrt(1.0 + R[1, 1] - R[0, 0] - R[2, 2]) * 2.0
            w = (R[0, 2] - R[2, 0]) / s
            x = (R[0, 1] + R[1, 0]) / s
            y = 0.25 * s
            z = (R[1, 2] + R[2, 1]) / s
        else:
            s = math.sqrt(1.0 + R[2, 2] - R[0, 0] - R[1, 1]) * 2.0
            w = (R[1, 0] - R[0, 1]) / s
            x = (R[0, 2] + R[2, 0]) / s
            y = (R[1, 2] + R[2, 1]) / s
            z = 0.25 * s
        return UnitQuaternion(x, y, z, w)

    def to_matrix(self) -> np.ndarray:
        x, y, z, w = self.x, self.y, self.z, self.w
        return np.array([
            [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
            [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
            [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
        ])

    def to_rotvec(self) -> np.ndarray:
        """Logarithm map SO(3) -> so(3). Raises AngleAtPi near the branch cut."""
        vn = math.sqrt(self.x**2 + self.y**2 + self.z**2)
        w = min(abs(self.w), 1.0)  # canonical sign guarantees w >= 0
        angle = 2.0 * math.atan2(vn, w)
        if angle > math.pi - PI_MARGIN:
            raise AngleAtPi(f"rotation angle {angle:.9f} within {PI_MARGIN} of pi")
        if vn < SMALL_ANGLE:
            # angle/sin(angle/2) ~ 2 + angle^2/12
            return np.array([self.x, self.y, self.z]) * (2.0 + angle * angle / 12.0)
        return np.array([self.x, self.y, self.z]) * (angle / vn)

    def angle(self) -> float:
        """Geodesic rotation angle in [0, pi]."""
        vn = math.sqrt(self.x**2 + self.y**2 + self.z**2)
        return 2.0 * math.atan2(vn, min(abs(self.w), 1.0))

    def multiply(self, other: "UnitQuaternion") -> "UnitQuaternion":
        ax, ay, az, aw = self.x, self.y, self.z, self.w
        bx, by, bz, bw = other.x, other.y, other.z, other.w
        return UnitQuaternion(
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
            aw * bw - ax * bx - ay * by - az * bz,
        )

    def conjugate(self) -> "UnitQuaternion":
        return UnitQuaternion(-self.x, -self.y, -self.z, self.w)

    def rotate(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        qv = np.array([self.x, self.y, self.z])
        t = 2.0 * np.cross(qv, p)
        return p + self.w * t + np.cross(qv, t)


@dataclass(frozen=True)
class RigidMotion:
    """SE(3) element: rotation (unit quaternion) + translation in meters."""

    rotation: UnitQuaternion
    translation: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.translation, dtype=float).reshape(3)
        if not np.all(np.isfinite(t)):
            raise ValueError("translation must be finite")
        t.setflags(write=False)
        object.__setattr__(self, "translation", t)

    @staticmethod
    def identity() -> "RigidMotion":
        return RigidMotion(UnitQuaternion.identity(), np.zeros(3))

    @staticmethod
    def from_matrix(M) -> "RigidMotion":
        M = np.asarray(M, dtype=float)
        return RigidMotion(UnitQuaternion.from_matrix(M[:3, :3]), M[:3, 3])

    def to_matrix(self) -> np.ndarray:
        M = np.eye(4)
        M[:3, :3] = self.rotation.to_matrix()
        M[:3, 3] = self.translation
        return M


@dataclass(frozen=True)
class Twist:
    """se(3) element: omega (rad) rotational part, v (m) translational part."""

    omega: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        omega = np.asarray(self.omega, dtype=float).reshape(3)
        v = np.asarray(self.v, dtype=float).reshape(3)
        if not (np.all(np.isfinite(omega)) and np.all(np.isfinite(v))):
            raise ValueError("twist components must be finite")
        omega.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "v", v)

    @staticmethod
    def zero() -> "Twist":
        return Twist(np.zeros(3), np.zeros(3))

    def norm(self) -> float:
        return float(np.linalg.norm(np.concatenate([self.omega, self.v])))


def skew(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    return np.array([
        [0.0, -v[2], v[1]],
        [v[2], 0.0, -v[0]],
        [-v[1], v[0], 0.0],
    ])


def _left_jacobian(omega: np.ndarray) -> np.ndarray:
    """V(omega) such that exp translation = V @ v."""
    theta = float(np.linalg.norm(omega))
    W = skew(omega)
    if theta < SMALL_ANGLE:
        return np.eye(3) + 0.5 * W + (W @ W) / 6.0
    a = (1.0 - math.cos(theta)) / (theta * theta)
    b = (theta - math.sin(theta)) / (theta ** 3)
    return np.eye(3) + a * W + b * (W @ W)


def _left_jacobian_inv(omega: np.ndarray) -> np.ndarray:
    theta = float(np.linalg.norm(omega))
    W = skew(omega)
    if theta < SMALL_ANGLE:
        return np.eye(3) - 0.5 * W + (W @ W) / 12.0
    half = theta / 2.0
    cot_term = (1.0 - half * math.cos(half) / math.sin(half)) / (theta * theta)
    return np.eye(3) - 0.5 * W + cot_term * (W @ W)


def se3_exp(xi: Twist) -> RigidMotion:
    """Closed-form exponential map se(3) -> SE(3)."""
    q = UnitQuaternion.from_rotvec(xi.omega)
    t = _left_jacobian(xi.omega) @ xi.v
    return RigidMotion(q, t)


def se3_log(T: RigidMotion) -> Twist:
    """Inverse of se3_exp. Raises AngleAtPi near the rotation branch cut."""
    omega = T.rotation.to_rotvec()
    v = _left_jacobian_inv(omega) @ T.translation
    return Twist(omega, v)


def compose(a: RigidMotion, b: RigidMotion) -> RigidMotion:
    """a after b: (a o b) p = a(b(p))."""
    return RigidMotion(a.rotation.multiply(b.rotation),
                       a.rotation.rotate(b.translation) + a.translation)


def invert(T: RigidMotion) -> RigidMotion:
    qc = T.rotation.conjugate()
    return RigidMotion(qc, -qc.rotate(T.translation))


def rotation_angle_deg(T: RigidMotion) -> float:
    """Geodesic rotation angle in degrees, in [0, 180]."""
    return math.degrees(T.rotation.angle())


def apply(T: RigidMotion, p) -> np.ndarray:
    return T.rotation.rotate(p) + T.translation


def apply_many(T: RigidMotion, points: np.ndarray) -> np.ndarray:
    """Transform an (N, 3) array of points."""
    return points @ T.rotation.to_matrix().T + T.translation


def motion_delta(a: RigidMotion, b: RigidMotion) -> tuple[float, float]:
    """(rotation angle deg, translation norm m) of invert(a) o b."""
    e = compose(invert(a), b)
    return rotation_angle_deg(e), float(np.linalg.norm(e.translation))


def serialize_pose(T: RigidMotion) -> str:
    """`tx ty tz qx qy qz qw` text order (TUM trajectory column order)."""
    q = T.rotation
    vals = [*T.translation, q.x, q.y, q.z, q.w]
    return " ".join(repr(float(v)) for v in vals)


def deserialize_pose(fields) -> RigidMotion:
    """Parse 7 numbers in `tx ty tz qx qy qz qw` order."""
    vals = [float(f) for f in fields]
    if len(vals) != 7:
        raise ValueError(f"expected 7 pose fields, got {len(vals)}")
    return RigidMotion(UnitQuaternion(vals[3], vals[4], vals[5], vals[6]),
                       np.array(vals[:3]))
