"""Vectorized quaternion / rigid-motion kernels (numpy reference backend).

Quaternions are scalar-first (w, x, y, z) and treated as unit up to rounding
drift; rotation vectors are axis * angle.  The compiled module ``_se3``
mirrors ``pairwise_pose_loss`` and ``motion_extrema``; keep the formulas and
the ``ANGLE_EPS`` series switch identical in both.

Series switch: the closed forms for the exp/log coefficients contain
1 - cos(theta) differences that lose precision long before theta reaches
machine epsilon.  Below ANGLE_EPS every coefficient uses its Taylor series
through theta^4, whose truncation error (< 1e-16 relative) is far below the
cancellation error of the closed form in that range.
"""

import numpy as np

from ..errors import AngleNearPi

ANGLE_EPS = 1e-2
PI_MARGIN = 1e-6


def qmul(a, b):
    """Hamilton product of quaternion arrays, shape (..., 4)."""
    aw, ax, ay, az = a[..., 0], a[..., 1], a[..., 2], a[..., 3]
    bw, bx, by, bz = b[..., 0], b[..., 1], b[..., 2], b[..., 3]
    return np.stack(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ],
        axis=-1,
    )


def qconj(q):
    out = np.array(q, copy=True)
    out[..., 1:] = -out[..., 1:]
    return out


def qcanon(q):
    """Flip sign so the scalar part is non-negative (double-cover pick)."""
    return np.where(q[..., :1] < 0.0, -q, +q)


def qnormalize(q):
    return qcanon(q / np.linalg.norm(q, axis=-1, keepdims=True))


def qrotate(q, v):
    """Rotate vectors v (..., 3) by unit quaternions q (..., 4)."""
    w = q[..., 0:1]
    u = q[..., 1:]
    uv = np.cross(u, v)
    return v + 2.0 * (w * uv + np.cross(u, uv))


def rotvec_to_quat(rv):
    theta = np.linalg.norm(rv, axis=-1, keepdims=True)
    t2 = theta * theta
    small = theta < ANGLE_EPS
    # sin(theta/2)/theta, series 1/2 - theta^2/48 + theta^4/3840
    s = np.where(
        small,
        0.5 - t2 / 48.0 + t2 * t2 / 3840.0,
        np.sin(0.5 * theta) / np.where(small, 1.0, theta),
    )
    return qcanon(np.concatenate([np.cos(0.5 * theta), s * rv], axis=-1))


def quat_to_rotvec(q):
    q = qcanon(q)
    n = np.linalg.norm(q[..., 1:], axis=-1, keepdims=True)
    theta = 2.0 * np.arctan2(n, q[..., 0:1])
    if np.any(theta > np.pi - PI_MARGIN):
        raise AngleNearPi("rotation angle within 1e-6 of pi; log map ill-conditioned")
    t2 = theta * theta
    small = theta < ANGLE_EPS
    # theta/sin(theta/2), series 2 + theta^2/12 + 7 theta^4/2880
    factor = np.where(
        small,
        2.0 + t2 / 12.0 + 7.0 * t2 * t2 / 2880.0,
        theta / np.where(small, 1.0, n),
    )
    return factor * q[..., 1:]


def _exp_coeffs(t2, small):
    """B = (1-cos)/th^2 and C = (th-sin)/th^3 with series below ANGLE_EPS."""
    theta = np.sqrt(t2)
    t2_safe = np.where(small, 1.0, t2)
    b = np.where(small, 0.5 - t2 / 24.0 + t2 * t2 / 720.0, (1.0 - np.cos(theta)) / t2_safe)
    c = np.where(
        small,
        1.0 / 6.0 - t2 / 120.0 + t2 * t2 / 5040.0,
        (theta - np.sin(theta)) / (t2_safe * np.where(small, 1.0, theta)),
    )
    return b, c


def se3_exp_qt(omega, v):
    """Exponential map; returns (quaternion, translation) arrays."""
    t2 = (omega * omega).sum(axis=-1, keepdims=True)
    small = t2 < ANGLE_EPS * ANGLE_EPS
    b, c = _exp_coeffs(t2, small)
    wxv = np.cross(omega, v)
    t = v + b * wxv + c * np.cross(omega, wxv)
    return rotvec_to_quat(omega), t


def se3_log_qt(q, t):
    """Logarithm map; returns (omega, v) arrays.  Raises AngleNearPi."""
    omega = quat_to_rotvec(q)
    t2 = (omega * omega).sum(axis=-1, keepdims=True)
    theta = np.sqrt(t2)
    small = t2 < ANGLE_EPS * ANGLE_EPS
    t2_safe = np.where(small, 1.0, t2)
    # D = (1 - th*sin/(2(1-cos)))/th^2, series 1/12 + th^2/720 + th^4/30240
    denom = np.where(small, 1.0, 2.0 * (1.0 - np.cos(theta)))
    d = np.where(
        small,
        1.0 / 12.0 + t2 / 720.0 + t2 * t2 / 30240.0,
        (1.0 - theta * np.sin(theta) / denom) / t2_safe,
    )
    wxt = np.cross(omega, t)
    v = t - 0.5 * wxt + d * np.cross(omega, wxt)
    return omega, v


def pairwise_pose_loss(gq, gt, pq, pt):
    """Pose supervision over all ordered pairs of a window.

    For every (i, j), i != j, forms the relative motions G_i^-1 G_j and
    T_i^-1 T_j, maps their discrepancy through the SE(3) log, and accumulates
    the translational and rotational norms separately.

    Returns (trans_sum, rot_sum) as floats.
    """
    n = gq.shape[0]
    ii, jj = np.nonzero(~np.eye(n, dtype=bool))
    gci = qconj(gq[ii])
    grel_q = qmul(gci, gq[jj])
    grel_t = qrotate(gci, gt[jj] - gt[ii])
    pci = qconj(pq[ii])
    prel_q = qmul(pci, pq[jj])
    prel_t = qrotate(pci, pt[jj] - pt[ii])
    ecq = qconj(grel_q)
    eq = qmul(ecq, prel_q)
    et = qrotate(ecq, prel_t - grel_t)
    omega, v = se3_log_qt(eq, et)
    trans = np.sqrt((v * v).sum(axis=-1)).sum()
    rot = np.sqrt((omega * omega).sum(axis=-1)).sum()
    return float(trans), float(rot)


def motion_extrema(q, t):
    """Per-axis maxima of consecutive frame-to-frame motion magnitudes.

    Returns (max |translation| per axis, max |rotation-vector| per axis),
    both shape (3,), over the n-1 consecutive relative poses.
    """
    ci = qconj(q[:-1])
    dq = qmul(ci, q[1:])
    dt = qrotate(ci, t[1:] - t[:-1])
    rv = quat_to_rotvec(dq)
    return np.abs(dt).max(axis=0), np.abs(rv).max(axis=0)
