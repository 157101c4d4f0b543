# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the hot kernels.

These avoid numpy dispatch overhead, which dominates for the 2x2..8x8
matrices this package lives on. Semantics match ``_fallback`` exactly.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def sld_eig_scale(p, a):
    cdef double[::1] pv = np.ascontiguousarray(p, dtype=np.float64)
    cdef complex[:, :, ::1] av = np.ascontiguousarray(a, dtype=np.complex128)
    cdef Py_ssize_t k = av.shape[0], n = av.shape[1]
    out_arr = np.empty((k, n, n), dtype=np.complex128)
    cdef complex[:, :, ::1] out = out_arr
    cdef Py_ssize_t i, r, c
    for i in range(k):
        for r in range(n):
            for c in range(n):
                out[i, r, c] = 2.0 * av[i, r, c] / (pv[r] + pv[c])
    return out_arr


def dcomm_eig_scale(p, a):
    cdef double[::1] pv = np.ascontiguousarray(p, dtype=np.float64)
    cdef complex[:, ::1] av = np.ascontiguousarray(a, dtype=np.complex128)
    cdef Py_ssize_t n = av.shape[0]
    out_arr = np.empty((n, n), dtype=np.complex128)
    cdef complex[:, ::1] out = out_arr
    cdef Py_ssize_t r, c
    cdef double w
    for r in range(n):
        for c in range(n):
            w = (pv[r] - pv[c]) / (pv[r] + pv[c])
            out[r, c] = -1j * w * av[r, c]
    return out_arr


def pair_gram(x, y, rho):
    cdef complex[:, :, ::1] xv = np.ascontiguousarray(x, dtype=np.complex128)
    cdef complex[:, :, ::1] yv = np.ascontiguousarray(y, dtype=np.complex128)
    cdef complex[:, ::1] rv = np.ascontiguousarray(rho, dtype=np.complex128)
    cdef Py_ssize_t k = xv.shape[0], m = yv.shape[0], n = rv.shape[0]
    out_arr = np.empty((k, m), dtype=np.complex128)
    cdef complex[:, ::1] out = out_arr
    ry_arr = np.empty((n, n), dtype=np.complex128)
    cdef complex[:, ::1] ry = ry_arr
    cdef Py_ssize_t i, l, a, b, c
    cdef complex acc
    for l in range(m):
        # ry = rho @ Y_l
        for a in range(n):
            for c in range(n):
                acc = 0
                for b in range(n):
                    acc = acc + rv[a, b] * yv[l, b, c]
                ry[a, c] = acc
        for i in range(k):
            # tr[X_i ry] with trace cycled so G = tr[X_i rho Y_l]
            acc = 0
            for a in range(n):
                for b in range(n):
                    acc = acc + xv[i, a, b] * ry[b, a]
            out[i, l] = acc
    return out_arr


def cfim_from_table(p, d):
    cdef double[::1] pv = np.ascontiguousarray(p, dtype=np.float64)
    cdef double[:, ::1] dv = np.ascontiguousarray(d, dtype=np.float64)
    cdef Py_ssize_t m = dv.shape[0], k = dv.shape[1]
    out_arr = np.zeros((k, k), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t x, i, j
    cdef double w
    for x in range(m):
        w = 1.0 / pv[x]
        for i in range(k):
            for j in range(k):
                out[i, j] += w * dv[x, i] * dv[x, j]
    return out_arr


def born_probs(effects, rho):
    cdef complex[:, :, ::1] ev = np.ascontiguousarray(effects, dtype=np.complex128)
    cdef complex[:, ::1] rv = np.ascontiguousarray(rho, dtype=np.complex128)
    cdef Py_ssize_t m = ev.shape[0], n = rv.shape[0]
    out_arr = np.empty(m, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t x, a, b
    cdef complex acc
    for x in range(m):
        acc = 0
        for a in range(n):
            for b in range(n):
                acc = acc + rv[a, b] * ev[x, b, a]
        out[x] = acc.real
    return out_arr
