"""Trajectory evaluation: Umeyama similarity alignment, ATE, AUC.

Alignment fits scale, rotation, and translation between the translation
point clouds of two trajectories (rotations of the poses do not enter the
fit).  ATE is the RMSE of per-pose translation residuals, optionally after
alignment.  AUC integrates the empirical success-rate step function exactly
over a fixed error window.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._kernels import se3_numpy as k
from .errors import DegenerateGeometry, EmptyInput, LengthMismatch, TooShort
from .errors import NonMonotonicTimestamps
from .geometry import RigidPose


@dataclass(frozen=True)
class Trajectory:
    """An ordered pose sequence with an opaque identifier."""

    poses: tuple[RigidPose, ...]
    sequence_id: str = ""

    def __post_init__(self):
        poses = tuple(self.poses)
        if not poses:
            raise EmptyInput(f"trajectory {self.sequence_id!r} has no poses")
        stamps = [p.timestamp for p in poses if p.timestamp is not None]
        if len(stamps) == len(poses) and any(b <= a for a, b in zip(stamps, stamps[1:])):
            raise NonMonotonicTimestamps(
                f"timestamps of {self.sequence_id!r} do not strictly increase"
            )
        object.__setattr__(self, "poses", poses)

    def __len__(self) -> int:
        return len(self.poses)

    def translations(self) -> np.ndarray:
        """Stacked translations, shape (n, 3)."""
        return np.stack([p.translation for p in self.poses])

    def rotations(self) -> np.ndarray:
        """Stacked quaternions, shape (n, 4)."""
        return np.stack([p.rotation for p in self.poses])


@dataclass(frozen=True)
class SimilarityTransform:
    """x -> scale * R x + t, fitted from est onto gt."""

    scale: float
    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        if not (np.isfinite(self.scale) and self.scale > 0):
            raise DegenerateGeometry(f"similarity scale {self.scale} must be positive")
        q = np.asarray(self.rotation, dtype=np.float64).reshape(4)
        object.__setattr__(self, "rotation", k.qcanon(q / np.linalg.norm(q)))
        object.__setattr__(
            self, "translation", np.asarray(self.translation, dtype=np.float64).reshape(3)
        )

    def apply(self, points: np.ndarray) -> np.ndarray:
        return self.scale * k.qrotate(self.rotation, points) + self.translation

    def inverse(self) -> "SimilarityTransform":
        qc = k.qconj(self.rotation)
        return SimilarityTransform(
            1.0 / self.scale, qc, -k.qrotate(qc, self.translation) / self.scale
        )


def _quat_from_matrix(m: np.ndarray) -> np.ndarray:
    """Rotation matrix to unit quaternion (w, x, y, z), Shepperd's method."""
    tr = m[0, 0] + m[1, 1] + m[2, 2]
    if tr > 0:
        s = np.sqrt(tr + 1.0) * 2.0
        q = np.array(
            [0.25 * s, (m[2, 1] - m[1, 2]) / s, (m[0, 2] - m[2, 0]) / s, (m[1, 0] - m[0, 1]) / s]
        )
    elif m[0, 0] >= m[1, 1] and m[0, 0] >= m[2, 2]:
        s = np.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2]) * 2.0
        q = np.array(
            [(m[2, 1] - m[1, 2]) / s, 0.25 * s, (m[0, 1] + m[1, 0]) / s, (m[0, 2] + m[2, 0]) / s]
        )
    elif m[1, 1] >= m[2, 2]:
        s = np.sqrt(1.0 + m[1, 1] - m[0, 0] - m[2, 2]) * 2.0
        q = np.array(
            [(m[0, 2] - m[2, 0]) / s, (m[0, 1] + m[1, 0]) / s, 0.25 * s, (m[1, 2] + m[2, 1]) / s]
        )
    else:
        s = np.sqrt(1.0 + m[2, 2] - m[0, 0] - m[1, 1]) * 2.0
        q = np.array(
            [(m[1, 0] - m[0, 1]) / s, (m[0, 2] + m[2, 0]) / s, (m[1, 2] + m[2, 1]) / s, 0.25 * s]
        )
    return k.qnormalize(q)


def umeyama_align(est: Trajectory, gt: Trajectory) -> SimilarityTransform:
    """Least-squares similarity transform mapping est translations onto gt.

    Closed form via centroids, cross-covariance SVD with reflection guard,
    and the trace-ratio scale.  Raises LengthMismatch on unequal lengths and
    DegenerateGeometry when the est points have zero variance.
    """
    if len(est) != len(gt):
        raise LengthMismatch(f"est has {len(est)} poses, gt has {len(gt)}")
    if len(est) < 3:
        raise TooShort(f"alignment needs >= 3 poses, got {len(est)}")
    x = est.translations()
    y = gt.translations()
    mu_x = x.mean(axis=0)
    mu_y = y.mean(axis=0)
    xc = x - mu_x
    yc = y - mu_y
    var_x = (xc * xc).sum() / len(est)
    if var_x < 1e-24:
        raise DegenerateGeometry("est translations are all coincident")
    cov = yc.T @ xc / len(est)
    u, d, vt = np.linalg.svd(cov)
    s = np.ones(3)
    if np.linalg.det(u) * np.linalg.det(vt) < 0:
        s[2] = -1.0
    rot = u @ np.diag(s) @ vt
    scale = float((d * s).sum() / var_x)
    if not (np.isfinite(scale) and scale > 0):
        raise DegenerateGeometry(f"alignment produced non-positive scale {scale}")
    q = _quat_from_matrix(rot)
    t = mu_y - scale * k.qrotate(q, mu_x)
    return SimilarityTransform(scale, q, t)


def ate(est: Trajectory, gt: Trajectory, align: bool = True) -> float:
    """RMSE of translation residuals, Umeyama-aligned when align is set."""
    if len(est) != len(gt):
        raise LengthMismatch(f"est has {len(est)} poses, gt has {len(gt)}")
    if len(est) < 2:
        raise TooShort(f"ate needs >= 2 poses, got {len(est)}")
    x = est.translations()
    y = gt.translations()
    if align:
        x = umeyama_align(est, gt).apply(x)
    resid = x - y
    return float(np.sqrt((resid * resid).sum(axis=-1).mean()))


def auc(errors, t_max: float = 1.0) -> float:
    """Area under the success-rate curve over [0, t_max], normalized.

    s(t) is the fraction of errors <= t.  The integral of that step function
    reduces to the mean of clip(1 - e/t_max, 0, 1) over the errors, which is
    what this computes; no sampling grid is involved.
    """
    e = np.asarray(list(errors), dtype=np.float64)
    if e.size == 0:
        raise EmptyInput("auc of an empty error list")
    if not t_max > 0:
        raise ValueError(f"t_max must be positive, got {t_max}")
    if np.any(e < 0) or not np.all(np.isfinite(e)):
        raise ValueError("errors must be finite and non-negative")
    return float(np.clip(1.0 - e / t_max, 0.0, 1.0).mean())
