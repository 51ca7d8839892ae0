# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled twins of the two hot kernels in se3_numpy.

Same formulas, same ANGLE_EPS series switch, same near-pi guard; edits here
must be mirrored there and vice versa.  Scalar C loops replace the
vectorized batch operations, which is where the speedup comes from on the
small windows the training loop feeds in.
"""

from libc.math cimport atan2, cos, fabs, sin, sqrt

import numpy as np

from vocl.errors import AngleNearPi

cdef double ANGLE_EPS = 1e-2
cdef double PI_MARGIN = 1e-6
cdef double PI = 3.14159265358979323846


cdef inline void c_qmul(const double* a, const double* b, double* out) noexcept nogil:
    out[0] = a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3]
    out[1] = a[0] * b[1] + a[1] * b[0] + a[2] * b[3] - a[3] * b[2]
    out[2] = a[0] * b[2] - a[1] * b[3] + a[2] * b[0] + a[3] * b[1]
    out[3] = a[0] * b[3] + a[1] * b[2] - a[2] * b[1] + a[3] * b[0]


cdef inline void c_qconj(const double* q, double* out) noexcept nogil:
    out[0] = q[0]
    out[1] = -q[1]
    out[2] = -q[2]
    out[3] = -q[3]


cdef inline void c_cross(const double* a, const double* b, double* out) noexcept nogil:
    out[0] = a[1] * b[2] - a[2] * b[1]
    out[1] = a[2] * b[0] - a[0] * b[2]
    out[2] = a[0] * b[1] - a[1] * b[0]


cdef inline void c_qrotate(const double* q, const double* v, double* out) noexcept nogil:
    cdef double uv[3]
    cdef double uuv[3]
    c_cross(&q[1], v, uv)
    c_cross(&q[1], uv, uuv)
    cdef int i
    for i in range(3):
        out[i] = v[i] + 2.0 * (q[0] * uv[i] + uuv[i])


cdef inline int c_quat_to_rotvec(const double* q, double* out) noexcept nogil:
    """Rotation vector of q; returns 1 when the angle is too close to pi."""
    cdef double w = q[0]
    cdef double x = q[1]
    cdef double y = q[2]
    cdef double z = q[3]
    if w < 0.0:
        w = -w
        x = -x
        y = -y
        z = -z
    cdef double n = sqrt(x * x + y * y + z * z)
    cdef double theta = 2.0 * atan2(n, w)
    if theta > PI - PI_MARGIN:
        return 1
    cdef double t2 = theta * theta
    cdef double factor
    if theta < ANGLE_EPS:
        factor = 2.0 + t2 / 12.0 + 7.0 * t2 * t2 / 2880.0
    else:
        factor = theta / n
    out[0] = factor * x
    out[1] = factor * y
    out[2] = factor * z
    return 0


cdef inline int c_log_qt(const double* q, const double* t, double* omega, double* v) noexcept nogil:
    """SE(3) log; fills omega and v, returns 1 on a near-pi rotation."""
    if c_quat_to_rotvec(q, omega):
        return 1
    cdef double t2 = omega[0] * omega[0] + omega[1] * omega[1] + omega[2] * omega[2]
    cdef double theta = sqrt(t2)
    cdef double d
    if theta < ANGLE_EPS:
        d = 1.0 / 12.0 + t2 / 720.0 + t2 * t2 / 30240.0
    else:
        d = (1.0 - theta * sin(theta) / (2.0 * (1.0 - cos(theta)))) / t2
    cdef double wxt[3]
    cdef double wxwxt[3]
    c_cross(omega, t, wxt)
    c_cross(omega, wxt, wxwxt)
    cdef int i
    for i in range(3):
        v[i] = t[i] - 0.5 * wxt[i] + d * wxwxt[i]
    return 0


def pairwise_pose_loss(gq, gt, pq, pt):
    """See se3_numpy.pairwise_pose_loss; identical contract."""
    cdef double[:, ::1] gqv = np.ascontiguousarray(gq, dtype=np.float64)
    cdef double[:, ::1] gtv = np.ascontiguousarray(gt, dtype=np.float64)
    cdef double[:, ::1] pqv = np.ascontiguousarray(pq, dtype=np.float64)
    cdef double[:, ::1] ptv = np.ascontiguousarray(pt, dtype=np.float64)
    cdef Py_ssize_t n = gqv.shape[0]
    cdef Py_ssize_t i, j, a
    cdef double trans = 0.0
    cdef double rot = 0.0
    cdef int bad = 0
    cdef double gci[4]
    cdef double pci[4]
    cdef double grel_q[4]
    cdef double prel_q[4]
    cdef double ecq[4]
    cdef double eq[4]
    cdef double dt[3]
    cdef double grel_t[3]
    cdef double prel_t[3]
    cdef double et[3]
    cdef double omega[3]
    cdef double v[3]
    with nogil:
        for i in range(n):
            if bad:
                break
            c_qconj(&gqv[i, 0], gci)
            c_qconj(&pqv[i, 0], pci)
            for j in range(n):
                if i == j:
                    continue
                c_qmul(gci, &gqv[j, 0], grel_q)
                for a in range(3):
                    dt[a] = gtv[j, a] - gtv[i, a]
                c_qrotate(gci, dt, grel_t)
                c_qmul(pci, &pqv[j, 0], prel_q)
                for a in range(3):
                    dt[a] = ptv[j, a] - ptv[i, a]
                c_qrotate(pci, dt, prel_t)
                c_qconj(grel_q, ecq)
                c_qmul(ecq, prel_q, eq)
                for a in range(3):
                    dt[a] = prel_t[a] - grel_t[a]
                c_qrotate(ecq, dt, et)
                if c_log_qt(eq, et, omega, v):
                    bad = 1
                    break
                trans += sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2])
                rot += sqrt(omega[0] * omega[0] + omega[1] * omega[1] + omega[2] * omega[2])
    if bad:
        raise AngleNearPi("rotation angle within 1e-6 of pi; log map ill-conditioned")
    return trans, rot


def motion_extrema(q, t):
    """See se3_numpy.motion_extrema; identical contract."""
    cdef double[:, ::1] qv = np.ascontiguousarray(q, dtype=np.float64)
    cdef double[:, ::1] tv = np.ascontiguousarray(t, dtype=np.float64)
    cdef Py_ssize_t n = qv.shape[0]
    cdef Py_ssize_t i, a
    cdef double ci[4]
    cdef double dq[4]
    cdef double dt[3]
    cdef double rel_t[3]
    cdef double rv[3]
    cdef int bad = 0
    mt_arr = np.zeros(3)
    mr_arr = np.zeros(3)
    cdef double[::1] mt = mt_arr
    cdef double[::1] mr = mr_arr
    with nogil:
        for i in range(n - 1):
            c_qconj(&qv[i, 0], ci)
            c_qmul(ci, &qv[i + 1, 0], dq)
            for a in range(3):
                dt[a] = tv[i + 1, a] - tv[i, a]
            c_qrotate(ci, dt, rel_t)
            if c_quat_to_rotvec(dq, rv):
                bad = 1
                break
            for a in range(3):
                if fabs(rel_t[a]) > mt[a]:
                    mt[a] = fabs(rel_t[a])
                if fabs(rv[a]) > mr[a]:
                    mr[a] = fabs(rv[a])
    if bad:
        raise AngleNearPi("rotation angle within 1e-6 of pi; log map ill-conditioned")
    return mt_arr, mr_arr
