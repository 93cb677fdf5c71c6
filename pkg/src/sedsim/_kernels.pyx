# cython: language_level=3
# cython: boundscheck=False
# cython: wraparound=False
# cython: cdivision=True
# cython: initializedcheck=False
"""Compiled hot kernels.

Every floating-point expression mirrors the NumPy twin in _kernels_py.py
term for term, and the extension is built with -ffp-contract=off, so both
backends produce bit-identical states.  Do not rearrange arithmetic in one
file without changing the other.  See _kernels_py.py for the equations.
"""

import numpy as np

BACKEND_NAME = "compiled"


cdef inline double _acc(double xx, double pp, double ee, bint has_e,
                        int kind, double c1, double c2, double c2_3,
                        double d1, double tmf, double kap) noexcept nogil:
    cdef double fx, fp, a
    if kind == 0:
        if has_e:
            return kap * ee
        return 0.0
    if kind == 1:
        a = -c1 * xx - d1 * pp
        if has_e:
            a = a + kap * ee
        return a
    fx = -c1 * xx - c2 * xx * xx * xx
    fp = -c1 - c2_3 * xx * xx
    a = fx + tmf * pp * fp
    if has_e:
        a = a + kap * ee
    return a


def rk4_trajectory_window(double[::1] x, double[::1] p, object e2_obj,
                          Py_ssize_t n_steps, double dt, double m,
                          double tau, double kappa, int kind,
                          double c1, double c2):
    """Advance (x, p) in place by n_steps; e2 is (n, 2*n_steps+1) or None."""
    if kind != 0 and kind != 1 and kind != 2:
        raise ValueError("kernel supports kinds 0, 1, 2")
    cdef double im = 1.0 / m
    cdef double tmf = tau / m
    cdef double hdt = 0.5 * dt
    cdef double sixth = dt / 6.0
    cdef double d1 = tmf * c1
    cdef double c2_3 = 3.0 * c2
    cdef double kap = kappa
    cdef bint has_field = e2_obj is not None
    if not has_field:
        e2_obj = np.zeros((1, 1))
    cdef double[:, ::1] e2 = e2_obj
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t i, s
    cdef double xx, pp, e0, eh, e1
    cdef double k1x, k1p, k2x, k2p, k3x, k3p, k4x, k4p
    cdef double x2, p2, x3, p3, x4, p4

    e0 = eh = e1 = 0.0
    with nogil:
        for i in range(n):
            xx = x[i]
            pp = p[i]
            for s in range(n_steps):
                if has_field:
                    e0 = e2[i, 2 * s]
                    eh = e2[i, 2 * s + 1]
                    e1 = e2[i, 2 * s + 2]
                k1x = pp * im
                k1p = _acc(xx, pp, e0, has_field, kind, c1, c2, c2_3, d1, tmf, kap)
                x2 = xx + hdt * k1x
                p2 = pp + hdt * k1p
                k2x = p2 * im
                k2p = _acc(x2, p2, eh, has_field, kind, c1, c2, c2_3, d1, tmf, kap)
                x3 = xx + hdt * k2x
                p3 = pp + hdt * k2p
                k3x = p3 * im
                k3p = _acc(x3, p3, eh, has_field, kind, c1, c2, c2_3, d1, tmf, kap)
                x4 = xx + dt * k3x
                p4 = pp + dt * k3p
                k4x = p4 * im
                k4p = _acc(x4, p4, e1, has_field, kind, c1, c2, c2_3, d1, tmf, kap)
                xx = xx + sixth * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
                pp = pp + sixth * (k1p + 2.0 * k2p + 2.0 * k3p + k4p)
            x[i] = xx
            p[i] = pp


cdef void _fd1_box(const double* f, double* out, Py_ssize_t n, double dx) noexcept nogil:
    cdef double c = 1.0 / (12.0 * dx)
    cdef Py_ssize_t i
    for i in range(2, n - 2):
        out[i] = (f[i - 2] - 8.0 * f[i - 1] + 8.0 * f[i + 1] - f[i + 2]) * c
    out[1] = (f[2] - f[0]) / (2.0 * dx)
    out[n - 2] = (f[n - 1] - f[n - 3]) / (2.0 * dx)
    out[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * dx)
    out[n - 1] = (3.0 * f[n - 1] - 4.0 * f[n - 2] + f[n - 3]) / (2.0 * dx)


cdef void _fd2_box(const double* f, double* out, Py_ssize_t n, double dx) noexcept nogil:
    cdef double c = 1.0 / (12.0 * dx * dx)
    cdef Py_ssize_t i
    for i in range(2, n - 2):
        out[i] = (-f[i - 2] + 16.0 * f[i - 1] - 30.0 * f[i]
                  + 16.0 * f[i + 1] - f[i + 2]) * c
    out[1] = (f[0] - 2.0 * f[1] + f[2]) / (dx * dx)
    out[n - 2] = (f[n - 3] - 2.0 * f[n - 2] + f[n - 1]) / (dx * dx)
    out[0] = (2.0 * f[0] - 5.0 * f[1] + 4.0 * f[2] - f[3]) / (dx * dx)
    out[n - 1] = (2.0 * f[n - 1] - 5.0 * f[n - 2] + 4.0 * f[n - 3] - f[n - 4]) / (dx * dx)


cdef void _fd1_periodic(const double* f, double* out, Py_ssize_t n, double dx) noexcept nogil:
    cdef double c = 1.0 / (12.0 * dx)
    cdef Py_ssize_t i, im2, im1, ip1, ip2
    for i in range(n):
        im2 = i - 2
        if im2 < 0:
            im2 += n
        im1 = i - 1
        if im1 < 0:
            im1 += n
        ip1 = i + 1
        if ip1 >= n:
            ip1 -= n
        ip2 = i + 2
        if ip2 >= n:
            ip2 -= n
        out[i] = (f[im2] - 8.0 * f[im1] + 8.0 * f[ip1] - f[ip2]) * c


cdef void _fd2_periodic(const double* f, double* out, Py_ssize_t n, double dx) noexcept nogil:
    cdef double c = 1.0 / (12.0 * dx * dx)
    cdef Py_ssize_t i, im2, im1, ip1, ip2
    for i in range(n):
        im2 = i - 2
        if im2 < 0:
            im2 += n
        im1 = i - 1
        if im1 < 0:
            im1 += n
        ip1 = i + 1
        if ip1 >= n:
            ip1 -= n
        ip2 = i + 2
        if ip2 >= n:
            ip2 -= n
        out[i] = (-f[im2] + 16.0 * f[im1] - 30.0 * f[i]
                  + 16.0 * f[ip1] - f[ip2]) * c


cdef void _madelung_rhs(const double* rr, const double* ss, const double* vv,
                        double* sx, double* rx, double* sxx, double* rxx,
                        double* dr, double* ds, Py_ssize_t n, double dx,
                        double tbm, double bom, bint periodic) noexcept nogil:
    cdef Py_ssize_t i
    cdef double q
    if periodic:
        _fd1_periodic(ss, sx, n, dx)
        _fd1_periodic(rr, rx, n, dx)
        _fd2_periodic(ss, sxx, n, dx)
        _fd2_periodic(rr, rxx, n, dx)
    else:
        _fd1_box(ss, sx, n, dx)
        _fd1_box(rr, rx, n, dx)
        _fd2_box(ss, sxx, n, dx)
        _fd2_box(rr, rxx, n, dx)
    for i in range(n):
        dr[i] = -(tbm * sx[i] * rx[i]) - bom * sxx[i]
        q = rxx[i] + rx[i] * rx[i]
        ds[i] = -vv[i] - bom * (sx[i] * sx[i] - q)


def madelung_step(double[::1] r, double[::1] s, double[::1] vv,
                  double dt, double dx, double tbm, double bom, bint periodic):
    """One RK4 step in place.  vv = V/(2 beta) precomputed by the driver."""
    cdef Py_ssize_t n = r.shape[0]
    scratch = np.empty((14, n))
    cdef double[:, ::1] w = scratch
    cdef double* sx = &w[0, 0]
    cdef double* rx = &w[1, 0]
    cdef double* sxx = &w[2, 0]
    cdef double* rxx = &w[3, 0]
    cdef double* dr1 = &w[4, 0]
    cdef double* ds1 = &w[5, 0]
    cdef double* dr2 = &w[6, 0]
    cdef double* ds2 = &w[7, 0]
    cdef double* dr3 = &w[8, 0]
    cdef double* ds3 = &w[9, 0]
    cdef double* dr4 = &w[10, 0]
    cdef double* ds4 = &w[11, 0]
    cdef double* rt = &w[12, 0]
    cdef double* st = &w[13, 0]
    cdef double* rp = &r[0]
    cdef double* sp = &s[0]
    cdef double* vp = &vv[0]
    cdef double hdt = 0.5 * dt
    cdef double sixth = dt / 6.0
    cdef Py_ssize_t i

    with nogil:
        _madelung_rhs(rp, sp, vp, sx, rx, sxx, rxx, dr1, ds1, n, dx, tbm, bom, periodic)
        for i in range(n):
            rt[i] = rp[i] + hdt * dr1[i]
            st[i] = sp[i] + hdt * ds1[i]
        _madelung_rhs(rt, st, vp, sx, rx, sxx, rxx, dr2, ds2, n, dx, tbm, bom, periodic)
        for i in range(n):
            rt[i] = rp[i] + hdt * dr2[i]
            st[i] = sp[i] + hdt * ds2[i]
        _madelung_rhs(rt, st, vp, sx, rx, sxx, rxx, dr3, ds3, n, dx, tbm, bom, periodic)
        for i in range(n):
            rt[i] = rp[i] + dt * dr3[i]
            st[i] = sp[i] + dt * ds3[i]
        _madelung_rhs(rt, st, vp, sx, rx, sxx, rxx, dr4, ds4, n, dx, tbm, bom, periodic)
        for i in range(n):
            rp[i] = rp[i] + sixth * (dr1[i] + 2.0 * dr2[i] + 2.0 * dr3[i] + dr4[i])
            sp[i] = sp[i] + sixth * (ds1[i] + 2.0 * ds2[i] + 2.0 * ds3[i] + ds4[i])
