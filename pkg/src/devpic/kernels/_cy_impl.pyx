# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled hot kernels: semantics identical to kernels._numpy_impl."""

import numpy as np

cimport numpy as cnp
from libc.math cimport cos, exp, fabs, sin, sqrt

cnp.import_array()

BACKEND = "cython"


def scatter_pairs(va, vb, delta, phi):
    cdef double[:, ::1] a = np.ascontiguousarray(va, dtype=np.float64).reshape(-1, 3)
    cdef double[:, ::1] b = np.ascontiguousarray(vb, dtype=np.float64).reshape(-1, 3)
    cdef double[::1] d = np.ascontiguousarray(delta, dtype=np.float64)
    cdef double[::1] ph = np.ascontiguousarray(phi, dtype=np.float64)
    cdef Py_ssize_t n = a.shape[0]
    out_a = np.empty((n, 3))
    out_b = np.empty((n, 3))
    cdef double[:, ::1] oa = out_a
    cdef double[:, ::1] ob = out_b
    cdef Py_ssize_t i
    cdef double ux, uy, uz, umag, uperp, one, sin_t, omc, sc, ss
    cdef double dux, duy, duz
    for i in range(n):
        ux = a[i, 0] - b[i, 0]
        uy = a[i, 1] - b[i, 1]
        uz = a[i, 2] - b[i, 2]
        umag = sqrt(ux * ux + uy * uy + uz * uz)
        uperp = sqrt(ux * ux + uy * uy)
        one = 1.0 + d[i] * d[i]
        sin_t = 2.0 * d[i] / one
        omc = 2.0 * d[i] * d[i] / one
        sc = sin_t * cos(ph[i])
        ss = sin_t * sin(ph[i])
        if umag == 0.0:
            dux = 0.0
            duy = 0.0
            duz = 0.0
        elif uperp == 0.0:
            dux = umag * sc
            duy = umag * ss
            duz = -uz * omc
        else:
            dux = (ux * uz * sc - uy * umag * ss) / uperp - ux * omc
            duy = (uy * uz * sc + ux * umag * ss) / uperp - uy * omc
            duz = -uperp * sc - uz * omc
        oa[i, 0] = a[i, 0] + 0.5 * dux
        oa[i, 1] = a[i, 1] + 0.5 * duy
        oa[i, 2] = a[i, 2] + 0.5 * duz
        ob[i, 0] = b[i, 0] - 0.5 * dux
        ob[i, 1] = b[i, 1] - 0.5 * duy
        ob[i, 2] = b[i, 2] - 0.5 * duz
    return out_a, out_b


def deposit_ngp(coords, double n_eff, int ktilde):
    cdef double[:, ::1] c = np.ascontiguousarray(coords, dtype=np.float64).reshape(-1, 3)
    cdef Py_ssize_t n = c.shape[0]
    cdef Py_ssize_t n_nodes = (<Py_ssize_t> ktilde) ** 3
    f0 = np.zeros(n_nodes)
    f1 = np.zeros((n_nodes, 3))
    f2 = np.zeros((n_nodes, 6))
    cdef double[::1] v0 = f0
    cdef double[:, ::1] v1 = f1
    cdef double[:, ::1] v2 = f2
    cdef double h = 2.0 * np.pi / ktilde
    cdef Py_ssize_t i, flat
    cdef long i0, i1, i2
    cdef double d0, d1, d2, r
    for i in range(n):
        r = c[i, 0] / h
        i0 = <long> (r + (0.5 if r >= 0 else -0.5))
        d0 = c[i, 0] - h * i0
        i0 = i0 % ktilde
        if i0 < 0:
            i0 += ktilde
        r = c[i, 1] / h
        i1 = <long> (r + (0.5 if r >= 0 else -0.5))
        d1 = c[i, 1] - h * i1
        i1 = i1 % ktilde
        if i1 < 0:
            i1 += ktilde
        r = c[i, 2] / h
        i2 = <long> (r + (0.5 if r >= 0 else -0.5))
        d2 = c[i, 2] - h * i2
        i2 = i2 % ktilde
        if i2 < 0:
            i2 += ktilde
        flat = (i0 * ktilde + i1) * ktilde + i2
        v0[flat] += n_eff
        v1[flat, 0] += n_eff * d0
        v1[flat, 1] += n_eff * d1
        v1[flat, 2] += n_eff * d2
        v2[flat, 0] += n_eff * d0 * d0
        v2[flat, 1] += n_eff * d1 * d1
        v2[flat, 2] += n_eff * d2 * d2
        v2[flat, 3] += n_eff * d0 * d1
        v2[flat, 4] += n_eff * d0 * d2
        v2[flat, 5] += n_eff * d1 * d2
    return f0, f1, f2


def cell_index(x, double length, long n_cells):
    cdef double[::1] xx = np.ascontiguousarray(x, dtype=np.float64)
    cdef Py_ssize_t n = xx.shape[0]
    out = np.empty(n, dtype=np.int64)
    cdef long[::1] o = out
    cdef double inv = n_cells / length
    cdef Py_ssize_t i
    cdef double w
    cdef long k
    for i in range(n):
        w = xx[i] - length * (<long> (xx[i] / length))
        if w < 0:
            w += length
        k = <long> (w * inv)
        if k < 0:
            k = 0
        elif k >= n_cells:
            k = n_cells - 1
        o[i] = k
    return out


def cell_moments(cells, v, long n_cells):
    cdef long[::1] c = np.ascontiguousarray(cells, dtype=np.int64)
    cdef double[:, ::1] vv = np.ascontiguousarray(v, dtype=np.float64)
    cdef Py_ssize_t n = c.shape[0]
    counts = np.zeros(n_cells, dtype=np.int64)
    vsum = np.zeros((n_cells, 3))
    v2sum = np.zeros(n_cells)
    cdef long[::1] cnt = counts
    cdef double[:, ::1] vs = vsum
    cdef double[::1] v2 = v2sum
    cdef Py_ssize_t i
    cdef long k
    for i in range(n):
        k = c[i]
        cnt[k] += 1
        vs[k, 0] += vv[i, 0]
        vs[k, 1] += vv[i, 1]
        vs[k, 2] += vv[i, 2]
        v2[k] += vv[i, 0] * vv[i, 0] + vv[i, 1] * vv[i, 1] + vv[i, 2] * vv[i, 2]
    return counts, vsum, v2sum


def kick_drift(x, v, E_cells, double dt, double length):
    cdef double[::1] xx = x
    cdef double[:, ::1] vv = v
    cdef double[::1] ee = np.ascontiguousarray(E_cells, dtype=np.float64)
    cdef Py_ssize_t n = xx.shape[0]
    cdef Py_ssize_t i
    cdef double w
    for i in range(n):
        vv[i, 0] -= ee[i] * dt
        w = xx[i] + vv[i, 0] * dt
        w = w - length * (<long> (w / length))
        if w < 0:
            w += length
        xx[i] = w
    return None


def poly_probe_max(packed, xi, double kappa):
    cdef double[:, ::1] p = np.ascontiguousarray(packed, dtype=np.float64)
    cdef double[:, ::1] x = np.ascontiguousarray(xi, dtype=np.float64)
    cdef Py_ssize_t n_cells = p.shape[0]
    cdef Py_ssize_t n_probe = x.shape[0]
    gauss_np = kappa ** 1.5 * np.exp(-(kappa - 1.0) * np.sum(np.asarray(xi) ** 2, axis=1) / 2.0)
    cdef double[::1] gauss = np.ascontiguousarray(gauss_np)
    out = np.empty(n_cells)
    cdef double[::1] o = out
    cdef Py_ssize_t c, q, a
    cdef double T, sq, best, val, sm3, root
    cdef double w0, w1, w2, vv0, vv1, vv2, g0, g1, g2
    for c in range(n_cells):
        T = p[c, 3]
        root = sqrt(kappa * T)
        best = 0.0
        for q in range(n_probe):
            w0 = root * x[q, 0]
            w1 = root * x[q, 1]
            w2 = root * x[q, 2]
            vv0 = p[c, 0] + w0
            vv1 = p[c, 1] + w1
            vv2 = p[c, 2] + w2
            sm3 = (w0 * w0 + w1 * w1 + w2 * w2) / T - 3.0
            g0 = p[c, 15] * w0 + p[c, 16] * w1 + p[c, 17] * w2
            g1 = p[c, 18] * w0 + p[c, 19] * w1 + p[c, 20] * w2
            g2 = p[c, 21] * w0 + p[c, 22] * w1 + p[c, 23] * w2
            val = (p[c, 4]
                   + p[c, 5] * w0 + p[c, 6] * w1 + p[c, 7] * w2
                   + p[c, 8] * sm3
                   + vv0 * (p[c, 9] + p[c, 12] * sm3)
                   + vv1 * (p[c, 10] + p[c, 13] * sm3)
                   + vv2 * (p[c, 11] + p[c, 14] * sm3)
                   + (vv0 * g0 + vv1 * g1 + vv2 * g2) / T)
            val = fabs(val) * gauss[q]
            if val > best:
                best = val
        o[c] = best
    return out
