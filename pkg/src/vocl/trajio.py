"""Reading and writing trajectory files.

Two line formats, both storing the quaternion as qx qy qz qw (scalar last):

  tum:       "timestamp tx ty tz qx qy qz qw"
  tartanair: "tx ty tz qx qy qz qw" with the frame index as implicit timestamp

Lines starting with '#' and blank lines are skipped.  Floats are written
with repr so a write/read round trip reproduces the numbers exactly.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import BadQuaternion, MalformedLine
from .geometry import RigidPose
from .metrics import Trajectory

FORMATS = ("tum", "tartanair")

# raw file quaternions may carry rounding drift but not arbitrary scale
QUAT_NORM_BAND = (0.9, 1.1)


def _parse_floats(tokens, path, line_no):
    try:
        return [float(tok) for tok in tokens]
    except ValueError:
        raise MalformedLine("token is not a number", path=str(path), line_no=line_no) from None


def parse_trajectory_file(path, fmt="tum"):
    """Load a trajectory file; returns a Trajectory named after the file stem."""
    if fmt not in FORMATS:
        raise ValueError(f"unknown trajectory format: {fmt!r}")
    path = Path(path)
    n_fields = 8 if fmt == "tum" else 7
    poses = []
    with open(path) as fh:
        for line_no, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            tokens = stripped.split()
            if len(tokens) != n_fields:
                raise MalformedLine(
                    f"expected {n_fields} fields, got {len(tokens)}",
                    path=str(path),
                    line_no=line_no,
                )
            values = _parse_floats(tokens, path, line_no)
            if fmt == "tum":
                stamp = values[0]
                tx, ty, tz, qx, qy, qz, qw = values[1:]
            else:
                stamp = float(len(poses))
                tx, ty, tz, qx, qy, qz, qw = values
            norm = float(np.sqrt(qw * qw + qx * qx + qy * qy + qz * qz))
            if not (QUAT_NORM_BAND[0] <= norm <= QUAT_NORM_BAND[1]):
                raise BadQuaternion(
                    f"{path}:{line_no}: quaternion norm {norm:.6g} outside "
                    f"[{QUAT_NORM_BAND[0]}, {QUAT_NORM_BAND[1]}]"
                )
            poses.append(
                RigidPose(
                    rotation=np.array([qw, qx, qy, qz]),
                    translation=np.array([tx, ty, tz]),
                    timestamp=stamp,
                )
            )
    return Trajectory(poses=tuple(poses), sequence_id=path.stem)


def write_trajectory_file(path, trajectory, fmt="tum"):
    """Write a trajectory; inverse of parse_trajectory_file up to rounding."""
    if fmt not in FORMATS:
        raise ValueError(f"unknown trajectory format: {fmt!r}")
    path = Path(path)
    lines = []
    for i, pose in enumerate(trajectory.poses):
        qw, qx, qy, qz = (float(c) for c in pose.rotation)
        tx, ty, tz = (float(c) for c in pose.translation)
        fields = [tx, ty, tz, qx, qy, qz, qw]
        if fmt == "tum":
            stamp = pose.timestamp if pose.timestamp is not None else float(i)
            fields = [float(stamp)] + fields
        lines.append(" ".join(repr(v) for v in fields))
    path.write_text("\n".join(lines) + "\n")
    return path
