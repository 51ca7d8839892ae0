"""Alignment and metric checks against transform-recovery and grid oracles."""

import numpy as np
import pytest

from vocl.errors import DegenerateGeometry, EmptyInput, LengthMismatch, NonMonotonicTimestamps, TooShort
from vocl.geometry import RigidPose, Twist, se3_exp
from vocl.metrics import SimilarityTransform, Trajectory, ate, auc, umeyama_align


def random_quat(rng):
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    return se3_exp(Twist(axis * rng.uniform(0, np.pi - 0.1), np.zeros(3))).rotation


def make_traj(points, seq="s"):
    return Trajectory(tuple(RigidPose([1, 0, 0, 0], p) for p in points), seq)


def random_traj(rng, n=20, seq="s"):
    return make_traj(rng.normal(scale=3.0, size=(n, 3)), seq)


def rmse(a, b):
    d = a - b
    return float(np.sqrt((d * d).sum(axis=-1).mean()))


class TestUmeyama:
    def test_perfect_fit(self):
        rng = np.random.default_rng(30)
        gt = random_traj(rng)
        sim = umeyama_align(gt, gt)
        assert abs(sim.scale - 1.0) < 1e-12
        np.testing.assert_allclose(sim.rotation, [1, 0, 0, 0], atol=1e-9)
        np.testing.assert_allclose(sim.translation, np.zeros(3), atol=1e-9)

    def test_doubled_translations(self):
        rng = np.random.default_rng(31)
        pts = rng.normal(size=(10, 3))
        pts -= pts.mean(axis=0)
        sim = umeyama_align(make_traj(2.0 * pts), make_traj(pts))
        assert abs(sim.scale - 0.5) < 1e-12
        np.testing.assert_allclose(sim.rotation, [1, 0, 0, 0], atol=1e-9)
        np.testing.assert_allclose(sim.translation, np.zeros(3), atol=1e-9)

    def test_recovers_known_transform(self):
        rng = np.random.default_rng(32)
        for _ in range(100):
            gt_pts = rng.normal(scale=2.0, size=(15, 3))
            s = rng.uniform(0.2, 5.0)
            q = random_quat(rng)
            t = rng.normal(scale=4.0, size=3)
            fwd = SimilarityTransform(s, q, t)
            est = make_traj(fwd.apply(gt_pts))
            sim = umeyama_align(est, make_traj(gt_pts))
            aligned = sim.apply(est.translations())
            assert rmse(aligned, gt_pts) < 1e-9

    def test_left_invariance_under_rigid_motion(self):
        rng = np.random.default_rng(33)
        est = random_traj(rng, seq="e")
        gt = random_traj(rng, seq="g")
        base = rmse(umeyama_align(est, gt).apply(est.translations()), gt.translations())
        move = SimilarityTransform(1.0, random_quat(rng), rng.normal(size=3))
        est2 = make_traj(move.apply(est.translations()))
        gt2 = make_traj(move.apply(gt.translations()))
        moved = rmse(umeyama_align(est2, gt2).apply(est2.translations()), gt2.translations())
        assert abs(base - moved) < 1e-9

    def test_alignment_never_hurts(self):
        rng = np.random.default_rng(34)
        for _ in range(50):
            est = random_traj(rng, seq="e")
            gt = random_traj(rng, seq="g")
            aligned = rmse(umeyama_align(est, gt).apply(est.translations()), gt.translations())
            raw = rmse(est.translations(), gt.translations())
            assert aligned <= raw + 1e-12

    def test_reflection_guard_keeps_rotation_proper(self):
        # near-planar clouds push the SVD toward a reflection
        rng = np.random.default_rng(35)
        for _ in range(50):
            pts = rng.normal(size=(12, 3))
            pts[:, 2] *= 1e-6
            est = make_traj(pts)
            gt = make_traj(rng.normal(size=(12, 3)))
            sim = umeyama_align(est, gt)
            assert sim.scale > 0

    def test_length_mismatch(self):
        rng = np.random.default_rng(36)
        with pytest.raises(LengthMismatch):
            umeyama_align(random_traj(rng, 5), random_traj(rng, 6))

    def test_degenerate_geometry(self):
        gt = make_traj(np.random.default_rng(37).normal(size=(5, 3)))
        est = make_traj(np.ones((5, 3)))
        with pytest.raises(DegenerateGeometry):
            umeyama_align(est, gt)

    def test_too_short(self):
        with pytest.raises(TooShort):
            umeyama_align(make_traj(np.zeros((2, 3))), make_traj(np.ones((2, 3))))


class TestSimilarityTransform:
    def test_apply_inverse_round_trip(self):
        rng = np.random.default_rng(38)
        sim = SimilarityTransform(2.5, random_quat(rng), [1.0, -2.0, 0.5])
        pts = rng.normal(size=(20, 3))
        back = sim.inverse().apply(sim.apply(pts))
        np.testing.assert_allclose(back, pts, atol=1e-9)

    def test_rejects_nonpositive_scale(self):
        with pytest.raises(DegenerateGeometry):
            SimilarityTransform(0.0, [1, 0, 0, 0], np.zeros(3))


class TestAte:
    def test_identical(self):
        rng = np.random.default_rng(39)
        traj = random_traj(rng)
        assert ate(traj, traj, align=False) == 0.0
        assert ate(traj, traj, align=True) < 1e-9

    def test_constant_shift_unaligned(self):
        rng = np.random.default_rng(40)
        gt = random_traj(rng)
        est = make_traj(gt.translations() + np.array([1.0, 0.0, 0.0]))
        assert abs(ate(est, gt, align=False) - 1.0) < 1e-12

    def test_constant_shift_aligned_absorbed(self):
        rng = np.random.default_rng(41)
        gt = random_traj(rng)
        est = make_traj(gt.translations() + np.array([1.0, 0.0, 0.0]))
        assert ate(est, gt, align=True) < 1e-9

    def test_analytic_rmse(self):
        gt = make_traj(np.zeros((2, 3)))
        est = make_traj(np.array([[3.0, 0, 0], [0, 4.0, 0]]))
        want = np.sqrt((9.0 + 16.0) / 2.0)
        assert abs(ate(est, gt, align=False) - want) < 1e-12

    def test_length_mismatch(self):
        rng = np.random.default_rng(42)
        with pytest.raises(LengthMismatch):
            ate(random_traj(rng, 4), random_traj(rng, 5))

    def test_too_short(self):
        with pytest.raises(TooShort):
            ate(make_traj(np.zeros((1, 3))), make_traj(np.zeros((1, 3))), align=False)


class TestAuc:
    def test_all_zero(self):
        assert auc([0.0, 0.0, 0.0]) == 1.0

    def test_all_beyond_window(self):
        assert auc([1.0, 2.0, 5.0]) == 0.0

    def test_single_half(self):
        assert abs(auc([0.5]) - 0.5) < 1e-15

    def test_grid_integration_oracle(self):
        rng = np.random.default_rng(43)
        ts = np.linspace(0, 1, 200001)[1:]  # right-edge samples of s(t)
        for _ in range(20):
            errors = rng.uniform(0, 1.5, size=rng.integers(1, 30))
            s = (errors[None, :] <= ts[:, None]).mean(axis=1)
            approx = s.mean()
            assert abs(auc(errors, 1.0) - approx) < 1e-4

    def test_monotone_in_errors(self):
        rng = np.random.default_rng(44)
        for _ in range(1000):
            errors = rng.uniform(0, 2, size=rng.integers(1, 20))
            base = auc(errors)
            i = rng.integers(0, errors.size)
            lowered = errors.copy()
            lowered[i] = rng.uniform(0, errors[i])
            assert auc(lowered) >= base - 1e-15

    def test_custom_window(self):
        assert abs(auc([1.0], t_max=2.0) - 0.5) < 1e-15

    def test_empty_raises(self):
        with pytest.raises(EmptyInput):
            auc([])

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            auc([-0.1])


class TestTrajectory:
    def test_empty_rejected(self):
        with pytest.raises(EmptyInput):
            Trajectory((), "empty")

    def test_nonmonotonic_timestamps_rejected(self):
        poses = (
            RigidPose([1, 0, 0, 0], np.zeros(3), timestamp=1.0),
            RigidPose([1, 0, 0, 0], np.ones(3), timestamp=1.0),
        )
        with pytest.raises(NonMonotonicTimestamps):
            Trajectory(poses, "dup")

    def test_stacking_shapes(self):
        rng = np.random.default_rng(45)
        traj = random_traj(rng, 7)
        assert traj.translations().shape == (7, 3)
        assert traj.rotations().shape == (7, 4)
        assert len(traj) == 7
