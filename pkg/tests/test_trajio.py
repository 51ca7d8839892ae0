"""Trajectory file parsing and writing: formats, errors, round trips."""

import numpy as np
import pytest

from vocl.errors import (
    BadQuaternion,
    EmptyInput,
    MalformedLine,
    NonMonotonicTimestamps,
)
from vocl._kernels.se3_numpy import qnormalize
from vocl.geometry import RigidPose
from vocl.metrics import Trajectory
from vocl.trajio import (
    FORMATS,
    QUAT_NORM_BAND,
    parse_trajectory_file,
    write_trajectory_file,
)

TUM_TWO = (
    "# ts tx ty tz qx qy qz qw\n"
    "0.0 1.0 2.0 3.0 0.0 0.0 0.0 1.0\n"
    "0.5 1.5 2.0 3.0 0.0 0.7071067811865476 0.0 0.7071067811865476\n"
)


def random_trajectory(rng, n=7, seq="rt"):
    poses = []
    for i in range(n):
        q = qnormalize(rng.normal(size=4))
        poses.append(RigidPose(rotation=q, translation=rng.normal(size=3),
                               timestamp=float(i) * 0.5))
    return Trajectory(tuple(poses), seq)


class TestParsing:
    def test_tum_fields_and_quaternion_order(self, tmp_path):
        p = tmp_path / "seq.txt"
        p.write_text(TUM_TWO)
        traj = parse_trajectory_file(p)
        assert traj.sequence_id == "seq"
        assert len(traj) == 2
        assert traj.poses[0].timestamp == 0.0
        assert np.allclose(traj.poses[0].translation, [1.0, 2.0, 3.0])
        # file order is qx qy qz qw; internal order is w-first
        w = 0.7071067811865476
        assert np.allclose(traj.poses[1].rotation, [w, 0.0, w, 0.0])

    def test_comments_and_blank_lines_skipped(self, tmp_path):
        p = tmp_path / "c.txt"
        p.write_text("# a\n\n0 0 0 0 0 0 0 1\n\n# b\n1 0 0 0 0 0 0 1\n")
        assert len(parse_trajectory_file(p)) == 2

    def test_tartanair_has_no_timestamp_column(self, tmp_path):
        p = tmp_path / "t.txt"
        p.write_text("1 2 3 0 0 0 1\n4 5 6 0 0 0 1\n")
        traj = parse_trajectory_file(p, fmt="tartanair")
        assert [pose.timestamp for pose in traj.poses] == [0.0, 1.0]
        assert np.allclose(traj.poses[1].translation, [4.0, 5.0, 6.0])

    def test_wrong_field_count_reports_line(self, tmp_path):
        p = tmp_path / "short.txt"
        p.write_text("0 0 0 0 0 0 0 1\n0 1 2\n")
        with pytest.raises(MalformedLine) as err:
            parse_trajectory_file(p)
        assert "expected 8 fields, got 3" in str(err.value)
        assert err.value.line_no == 2

    def test_non_numeric_token_reports_line(self, tmp_path):
        p = tmp_path / "alpha.txt"
        p.write_text("# header\n0 zero 0 0 0 0 0 1\n")
        with pytest.raises(MalformedLine) as err:
            parse_trajectory_file(p)
        assert err.value.line_no == 2

    def test_quaternion_norm_band_enforced(self, tmp_path):
        p = tmp_path / "badq.txt"
        p.write_text("0 0 0 0 0 0 0 0.5\n")
        with pytest.raises(BadQuaternion) as err:
            parse_trajectory_file(p)
        assert "0.5" in str(err.value)
        assert str(QUAT_NORM_BAND[0]) in str(err.value)

    def test_slightly_off_norm_is_normalized(self, tmp_path):
        p = tmp_path / "near.txt"
        p.write_text("0 0 0 0 0 0 0 1.05\n")
        traj = parse_trajectory_file(p)
        assert np.linalg.norm(traj.poses[0].rotation) == pytest.approx(1.0, abs=1e-12)

    def test_non_monotonic_timestamps_rejected(self, tmp_path):
        p = tmp_path / "mono.txt"
        p.write_text("1.0 0 0 0 0 0 0 1\n0.5 0 0 0 0 0 0 1\n")
        with pytest.raises(NonMonotonicTimestamps):
            parse_trajectory_file(p)

    def test_empty_file_rejected(self, tmp_path):
        p = tmp_path / "none.txt"
        p.write_text("# only a comment\n")
        with pytest.raises(EmptyInput):
            parse_trajectory_file(p)

    def test_unknown_format_rejected(self, tmp_path):
        p = tmp_path / "x.txt"
        p.write_text("0 0 0 0 0 0 0 1\n")
        with pytest.raises(ValueError):
            parse_trajectory_file(p, fmt="kitti")
        assert set(FORMATS) == {"tum", "tartanair"}


class TestRoundTrip:
    @pytest.mark.parametrize("fmt", FORMATS)
    def test_write_then_parse_is_exact(self, tmp_path, fmt):
        rng = np.random.default_rng(3)
        traj = random_trajectory(rng)
        p = tmp_path / "out.txt"
        write_trajectory_file(p, traj, fmt=fmt)
        back = parse_trajectory_file(p, fmt=fmt)
        assert len(back) == len(traj)
        for a, b in zip(back.poses, traj.poses):
            # writer canonicalizes sign; compare as rotations
            assert np.array_equal(a.rotation, b.rotation) or np.array_equal(
                a.rotation, -b.rotation
            )
            assert np.array_equal(a.translation, b.translation)

    def test_write_is_deterministic(self, tmp_path):
        rng = np.random.default_rng(4)
        traj = random_trajectory(rng)
        a, b = tmp_path / "a.txt", tmp_path / "b.txt"
        write_trajectory_file(a, traj)
        write_trajectory_file(b, traj)
        assert a.read_bytes() == b.read_bytes()
