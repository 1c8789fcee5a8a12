# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled twins of the loops in ``_pykernels``.

The loops release the GIL so a thread pool can split energy or time
grids.  Operation order matches the numpy versions exactly.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport sin, exp, sqrt, fabs, M_PI
cimport scipy.special.cython_special as csc

cnp.import_array()

cdef enum:
    SINC = 0


cdef inline void _step(double c, bint inverse, double *m) noexcept nogil:
    cdef double n1, n2
    if inverse:
        n1 = c * m[2] - m[0]
        n2 = c * m[3] - m[1]
        m[0] = m[2]
        m[1] = m[3]
        m[2] = n1
        m[3] = n2
    else:
        n1 = c * m[0] - m[2]
        n2 = c * m[1] - m[3]
        m[2] = m[0]
        m[3] = m[1]
        m[0] = n1
        m[1] = n2


def transfer_final(xs, vals, bint inverse):
    cdef double[::1] x = np.ascontiguousarray(xs, dtype=np.float64).reshape(-1)
    cdef double[::1] v = np.ascontiguousarray(vals, dtype=np.float64).reshape(-1)
    out = np.empty((x.shape[0], 4))
    cdef double[:, ::1] o = out
    cdef Py_ssize_t i, j, nx = x.shape[0], nv = v.shape[0]
    cdef double m[4]
    with nogil:
        for i in range(nx):
            m[0] = 1.0
            m[1] = 0.0
            m[2] = 0.0
            m[3] = 1.0
            for j in range(nv):
                _step(x[i] - v[j], inverse, m)
            o[i, 0] = m[0]
            o[i, 1] = m[1]
            o[i, 2] = m[2]
            o[i, 3] = m[3]
    return out


def transfer_path(xs, vals, bint inverse):
    cdef double[::1] x = np.ascontiguousarray(xs, dtype=np.float64).reshape(-1)
    cdef double[::1] v = np.ascontiguousarray(vals, dtype=np.float64).reshape(-1)
    out = np.empty((x.shape[0], v.shape[0] + 1, 4))
    cdef double[:, :, ::1] o = out
    cdef Py_ssize_t i, j, k, nx = x.shape[0], nv = v.shape[0]
    cdef double m[4]
    with nogil:
        for i in range(nx):
            m[0] = 1.0
            m[1] = 0.0
            m[2] = 0.0
            m[3] = 1.0
            for k in range(4):
                o[i, 0, k] = m[k]
            for j in range(nv):
                _step(x[i] - v[j], inverse, m)
                for k in range(4):
                    o[i, j + 1, k] = m[k]
    return out


def propagate_vector(xs, vals, double u1, double u2):
    cdef double[::1] x = np.ascontiguousarray(xs, dtype=np.float64).reshape(-1)
    cdef double[::1] v = np.ascontiguousarray(vals, dtype=np.float64).reshape(-1)
    out = np.empty((x.shape[0], 2))
    cdef double[:, ::1] o = out
    cdef Py_ssize_t i, j, nx = x.shape[0], nv = v.shape[0]
    cdef double a, b, t
    with nogil:
        for i in range(nx):
            a = u1
            b = u2
            for j in range(nv):
                t = (x[i] - v[j]) * a - b
                b = a
                a = t
            o[i, 0] = a
            o[i, 1] = b
    return out


def pk_cumulative(xs, vals, Py_ssize_t k_max):
    cdef double[::1] x = np.ascontiguousarray(xs, dtype=np.float64).reshape(-1)
    cdef double[::1] v = np.ascontiguousarray(vals, dtype=np.float64).reshape(-1)
    if v.shape[0] < 2 * k_max - 1:
        raise ValueError("need at least 2*k_max - 1 potential values")
    out = np.empty((x.shape[0], k_max, 3))
    cdef double[:, :, ::1] o = out
    cdef Py_ssize_t i, j, nx = x.shape[0]
    cdef double m[4]
    cdef double s11, s12, s22
    with nogil:
        for i in range(nx):
            m[0] = 1.0
            m[1] = 0.0
            m[2] = 0.0
            m[3] = 1.0
            s11 = 0.0
            s12 = 0.0
            s22 = 0.0
            for j in range(2 * k_max - 1):
                _step(x[i] - v[j], False, m)
                if j % 2 == 0:
                    s11 = s11 + (m[0] * m[0] + m[2] * m[2])
                    s12 = s12 + (m[0] * m[1] + m[2] * m[3])
                    s22 = s22 + (m[1] * m[1] + m[3] * m[3])
                    o[i, j // 2, 0] = s11
                    o[i, j // 2, 1] = s12
                    o[i, j // 2, 2] = s22
    return out


def norm_sums(xs, vals):
    cdef double[::1] x = np.ascontiguousarray(xs, dtype=np.float64).reshape(-1)
    cdef double[::1] v = np.ascontiguousarray(vals, dtype=np.float64).reshape(-1)
    out = np.empty((x.shape[0], 2))
    cdef double[:, ::1] o = out
    cdef Py_ssize_t i, j, nx = x.shape[0], nv = v.shape[0]
    cdef double m[4]
    cdef double f, sq, inv
    with nogil:
        for i in range(nx):
            m[0] = 1.0
            m[1] = 0.0
            m[2] = 0.0
            m[3] = 1.0
            sq = 0.0
            inv = 0.0
            for j in range(nv):
                _step(x[i] - v[j], False, m)
                f = m[0] * m[0] + m[1] * m[1] + m[2] * m[2] + m[3] * m[3]
                sq = sq + f
                inv = inv + 1.0 / f
            o[i, 0] = sq
            o[i, 1] = inv
    return out


cdef inline double _k0(double d, double a, int kind) noexcept nogil:
    cdef double z
    if kind == SINC:
        z = a * d
        if z == 0.0:
            return 1.0
        return sin(z) / z
    return exp(-a * d * d)


cdef inline double _k1(double d, double a, int kind) noexcept nogil:
    cdef double si, ci, r
    if kind == SINC:
        csc.sici(a * d, &si, &ci)
        return si / a
    r = sqrt(a)
    return 0.5 * sqrt(M_PI) / r * csc.erf(r * d)


cdef inline double _k2(double d, double a, int kind) noexcept nogil:
    cdef double z, s, si, ci
    d = fabs(d)
    if kind == SINC:
        z = a * d
        s = sin(0.5 * z)
        csc.sici(z, &si, &ci)
        return (d * si - 2.0 * s * s / a) / a
    return d * _k1(d, a, kind) - (1.0 - exp(-a * d * d)) / (2.0 * a)


def atom_sum(x_in, w_in, double a, int kind):
    cdef double[::1] x = np.ascontiguousarray(x_in, dtype=np.float64)
    cdef double[::1] w = np.ascontiguousarray(w_in, dtype=np.float64)
    cdef Py_ssize_t i, j, n = x.shape[0]
    cdef double total = 0.0, off
    with nogil:
        for i in range(n):
            off = 0.0
            for j in range(i + 1, n):
                off = off + w[j] * _k0(x[j] - x[i], a, kind)
            total = total + w[i] * (w[i] + 2.0 * off)
    return total


def jump_sum(e_in, c_in, double a, int kind):
    cdef double[::1] e = np.ascontiguousarray(e_in, dtype=np.float64)
    cdef double[::1] c = np.ascontiguousarray(c_in, dtype=np.float64)
    cdef Py_ssize_t p, q, n = e.shape[0]
    cdef double total = 0.0, inner
    with nogil:
        for p in range(n):
            inner = 0.0
            for q in range(p + 1, n):
                inner = inner + c[q] * _k2(e[q] - e[p], a, kind)
            total = total + c[p] * inner
    return -2.0 * total


def cross_sum(e_in, c_in, y_in, w_in, double a, int kind):
    cdef double[::1] e = np.ascontiguousarray(e_in, dtype=np.float64)
    cdef double[::1] c = np.ascontiguousarray(c_in, dtype=np.float64)
    cdef double[::1] y = np.ascontiguousarray(y_in, dtype=np.float64)
    cdef double[::1] w = np.ascontiguousarray(w_in, dtype=np.float64)
    cdef Py_ssize_t i, p, ne = e.shape[0], ny = y.shape[0]
    cdef double total = 0.0, inner
    with nogil:
        for i in range(ny):
            inner = 0.0
            for p in range(ne):
                inner = inner + c[p] * _k1(e[p] - y[i], a, kind)
            total = total + w[i] * -inner
    return total
