"""Rigid-body poses on SE(3): composition, inversion, exp/log maps.

Poses store a unit quaternion (scalar-first, canonicalized to w >= 0) plus a
translation.  All operations are pure functions on immutable values; the
heavy lifting lives in the vectorized kernels so single poses and batches
share one code path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._kernels import se3_numpy as k
from .errors import BadQuaternion


def _frozen(a, shape):
    out = np.asarray(a, dtype=np.float64).reshape(shape)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class RigidPose:
    """A rigid motion: rotation (unit quaternion w,x,y,z) and translation.

    The quaternion is renormalized and sign-canonicalized on construction,
    so two poses representing the same motion compare equal componentwise.
    The timestamp rides along for ingestion/evaluation and never enters the
    group operations.
    """

    rotation: np.ndarray
    translation: np.ndarray
    timestamp: float | None = None

    def __post_init__(self):
        q = np.asarray(self.rotation, dtype=np.float64).reshape(4)
        norm = float(np.linalg.norm(q))
        if not np.isfinite(norm) or norm < 1e-9:
            raise BadQuaternion(f"quaternion norm {norm} is not normalizable")
        object.__setattr__(self, "rotation", _frozen(k.qcanon(q / norm), 4))
        object.__setattr__(self, "translation", _frozen(self.translation, 3))

    @staticmethod
    def identity(timestamp: float | None = None) -> "RigidPose":
        return RigidPose(np.array([1.0, 0.0, 0.0, 0.0]), np.zeros(3), timestamp)


@dataclass(frozen=True)
class Twist:
    """An se(3) element: rotational part omega (rad), translational part v (m)."""

    omega: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "omega", _frozen(self.omega, 3))
        object.__setattr__(self, "v", _frozen(self.v, 3))


def compose(a: RigidPose, b: RigidPose) -> RigidPose:
    """Group product a * b (apply b first, then a)."""
    q = k.qnormalize(k.qmul(a.rotation, b.rotation))
    t = a.translation + k.qrotate(a.rotation, b.translation)
    return RigidPose(q, t)


def inverse(a: RigidPose) -> RigidPose:
    qc = k.qconj(a.rotation)
    return RigidPose(qc, -k.qrotate(qc, a.translation))


def relative_pose(a: RigidPose, b: RigidPose) -> RigidPose:
    """Motion taking frame a to frame b: a^-1 * b."""
    return compose(inverse(a), b)


def se3_log(pose: RigidPose) -> Twist:
    """Principal-branch logarithm.  Raises AngleNearPi within 1e-6 of pi."""
    omega, v = k.se3_log_qt(pose.rotation, pose.translation)
    return Twist(omega, v)


def se3_exp(xi: Twist) -> RigidPose:
    q, t = k.se3_exp_qt(xi.omega, xi.v)
    return RigidPose(q, t)
