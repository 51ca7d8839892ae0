"""Hot-kernel checks: brute-force oracles, backend parity, series switch."""

import numpy as np
import pytest

import vocl
from vocl._kernels import se3_numpy as k
from vocl.errors import AngleNearPi
from vocl.geometry import RigidPose, Twist, relative_pose, se3_exp, se3_log


def random_window(rng, n=10, spread=0.3):
    """A plausible pose window: smooth-ish motion, no near-pi relatives."""
    q = np.zeros((n, 4))
    t = np.zeros((n, 3))
    q[0] = [1, 0, 0, 0]
    pose = RigidPose.identity()
    from vocl.geometry import compose

    for i in range(1, n):
        step = se3_exp(Twist(rng.normal(scale=spread, size=3), rng.normal(scale=spread, size=3)))
        pose = compose(pose, step)
        q[i] = pose.rotation
        t[i] = pose.translation
    return q, t


def loop_pairwise(gq, gt, pq, pt):
    """Scalar reimplementation through the public pose API."""
    n = gq.shape[0]
    trans = rot = 0.0
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            g_rel = relative_pose(RigidPose(gq[i], gt[i]), RigidPose(gq[j], gt[j]))
            p_rel = relative_pose(RigidPose(pq[i], pt[i]), RigidPose(pq[j], pt[j]))
            err = relative_pose(g_rel, p_rel)
            xi = se3_log(err)
            trans += float(np.linalg.norm(xi.v))
            rot += float(np.linalg.norm(xi.omega))
    return trans, rot


def loop_extrema(q, t):
    n = q.shape[0]
    mt = np.zeros(3)
    mr = np.zeros(3)
    for i in range(n - 1):
        rel = relative_pose(RigidPose(q[i], t[i]), RigidPose(q[i + 1], t[i + 1]))
        mt = np.maximum(mt, np.abs(rel.translation))
        mr = np.maximum(mr, np.abs(se3_log(rel).omega))
    return mt, mr


class TestPairwiseLoss:
    def test_brute_force_oracle(self):
        rng = np.random.default_rng(20)
        for _ in range(10):
            gq, gt = random_window(rng, n=6)
            pq, pt = random_window(rng, n=6)
            got = k.pairwise_pose_loss(gq, gt, pq, pt)
            want = loop_pairwise(gq, gt, pq, pt)
            np.testing.assert_allclose(got, want, rtol=1e-10, atol=1e-12)

    def test_identical_trajectories_zero(self):
        rng = np.random.default_rng(21)
        gq, gt = random_window(rng)
        trans, rot = k.pairwise_pose_loss(gq, gt, gq, gt)
        assert trans < 1e-12 and rot < 1e-12

    def test_near_pi_raises(self):
        gq = np.tile([1.0, 0.0, 0.0, 0.0], (3, 1))
        gt = np.zeros((3, 3))
        flip = se3_exp(Twist([np.pi - 1e-8, 0, 0], np.zeros(3)))
        pq = gq.copy()
        pq[2] = flip.rotation
        with pytest.raises(AngleNearPi):
            k.pairwise_pose_loss(gq, gt, pq, gt)


class TestMotionExtrema:
    def test_brute_force_oracle(self):
        rng = np.random.default_rng(22)
        for _ in range(10):
            q, t = random_window(rng, n=20)
            got_t, got_r = k.motion_extrema(q, t)
            want_t, want_r = loop_extrema(q, t)
            np.testing.assert_allclose(got_t, want_t, rtol=1e-10, atol=1e-12)
            np.testing.assert_allclose(got_r, want_r, rtol=1e-10, atol=1e-12)

    def test_static_is_zero(self):
        q = np.tile([1.0, 0.0, 0.0, 0.0], (5, 1))
        t = np.ones((5, 3))
        mt, mr = k.motion_extrema(q, t)
        np.testing.assert_allclose(mt, 0, atol=0)
        np.testing.assert_allclose(mr, 0, atol=0)


@pytest.mark.skipif(vocl.BACKEND != "compiled", reason="compiled extension not built")
class TestBackendParity:
    def test_pairwise_parity(self):
        from vocl._kernels import _se3

        rng = np.random.default_rng(23)
        for _ in range(50):
            gq, gt = random_window(rng)
            pq, pt = random_window(rng)
            a = k.pairwise_pose_loss(gq, gt, pq, pt)
            b = _se3.pairwise_pose_loss(gq, gt, pq, pt)
            np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12)

    def test_extrema_parity(self):
        from vocl._kernels import _se3

        rng = np.random.default_rng(24)
        for _ in range(50):
            q, t = random_window(rng, n=30)
            a = k.motion_extrema(q, t)
            b = _se3.motion_extrema(q, t)
            np.testing.assert_allclose(a[0], b[0], rtol=1e-12, atol=1e-15)
            np.testing.assert_allclose(a[1], b[1], rtol=1e-12, atol=1e-15)

    def test_compiled_near_pi_raises(self):
        from vocl._kernels import _se3

        gq = np.tile([1.0, 0.0, 0.0, 0.0], (3, 1))
        gt = np.zeros((3, 3))
        flip = se3_exp(Twist([0, np.pi - 1e-8, 0], np.zeros(3)))
        pq = gq.copy()
        pq[1] = flip.rotation
        with pytest.raises(AngleNearPi):
            _se3.pairwise_pose_loss(gq, gt, pq, gt)


def v_matrix_reference(w, terms=60):
    """Top-right block of the 4x4 matrix exponential, one column at a time."""
    hat = np.array([[0, -w[2], w[1]], [w[2], 0, -w[0]], [-w[1], w[0], 0]])
    cols = []
    for e in np.eye(3):
        a = np.zeros((4, 4))
        a[:3, :3] = hat
        a[:3, 3] = e
        out = np.eye(4)
        term = np.eye(4)
        for n in range(1, terms):
            term = term @ a / n
            out = out + term
        cols.append(out[:3, 3])
    return np.stack(cols, axis=1)


class TestSeriesSwitch:
    def test_v_matrix_against_matrix_exp(self):
        # columns of V come out of se3_exp with unit translations; the
        # independent reference is the top-right block of the 4x4 series
        rng = np.random.default_rng(25)
        for theta in [1e-10, 1e-6, 1e-3, 9e-3, 1.1e-2, 0.1, 1.0, 3.0]:
            axis = rng.normal(size=3)
            axis /= np.linalg.norm(axis)
            w = axis * theta
            v_cols = np.stack([k.se3_exp_qt(w, e)[1] for e in np.eye(3)], axis=1)
            np.testing.assert_allclose(v_cols, v_matrix_reference(w), atol=1e-12)

    def test_vinv_matches_numerical_inverse(self):
        rng = np.random.default_rng(26)
        for theta in [1e-3, 9e-3, 1.1e-2, 0.5, 2.0]:
            axis = rng.normal(size=3)
            axis /= np.linalg.norm(axis)
            w = axis * theta
            v_cols = np.stack([k.se3_exp_qt(w, e)[1] for e in np.eye(3)], axis=1)
            q = k.rotvec_to_quat(w)
            vinv_cols = np.stack([k.se3_log_qt(q, e)[1] for e in np.eye(3)], axis=1)
            np.testing.assert_allclose(vinv_cols, np.linalg.inv(v_cols), atol=1e-11)

    def test_rotvec_round_trip_across_switch(self):
        rng = np.random.default_rng(27)
        thetas = np.concatenate(
            [np.logspace(-12, -2.01, 30), np.linspace(1.01e-2, 3.0, 30)]
        )
        for theta in thetas:
            axis = rng.normal(size=3)
            axis /= np.linalg.norm(axis)
            w = axis * theta
            back = k.quat_to_rotvec(k.rotvec_to_quat(w))
            np.testing.assert_allclose(back, w, rtol=1e-12, atol=1e-15)
