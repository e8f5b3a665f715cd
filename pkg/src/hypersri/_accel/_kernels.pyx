# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: frame differencing and k-NN neighbor search.

Semantics match `kernels_np` exactly (integer accumulation for the frame
metric, (distance, index) ordering for neighbors).
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

from libc.math cimport INFINITY


def content_diff_means(const unsigned char[:, :, :, ::1] frames):
    cdef Py_ssize_t n = frames.shape[0]
    cdef Py_ssize_t h = frames.shape[1]
    cdef Py_ssize_t w = frames.shape[2]
    cdef Py_ssize_t ch = frames.shape[3]
    out = np.zeros(n, dtype=np.float64)
    cdef double[::1] ov = out
    cdef Py_ssize_t t, i, j, c
    cdef long long acc
    cdef long long npix = h * w * ch
    cdef int d
    if n < 2 or npix == 0:
        return out
    for t in range(1, n):
        acc = 0
        for i in range(h):
            for j in range(w):
                for c in range(ch):
                    d = <int> frames[t, i, j, c] - <int> frames[t - 1, i, j, c]
                    acc += d if d >= 0 else -d
        ov[t] = acc / <double> npix
    return out


def knn_indices(const double[:, ::1] x, Py_ssize_t m):
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t c = x.shape[1]
    out = np.empty((n, m), dtype=np.int64)
    cdef long long[:, ::1] ov = out
    if m == 0:
        return out
    d2_arr = np.empty(n, dtype=np.float64)
    used_arr = np.zeros(n, dtype=np.uint8)
    cdef double[::1] d2 = d2_arr
    cdef unsigned char[::1] used = used_arr
    cdef Py_ssize_t v, u, k, j, best
    cdef double s, diff, bd
    for v in range(n):
        for u in range(n):
            s = 0.0
            for k in range(c):
                diff = x[u, k] - x[v, k]
                s += diff * diff
            d2[u] = s
            used[u] = 0
        used[v] = 1
        for j in range(m):
            best = -1
            bd = INFINITY
            for u in range(n):
                # strict < keeps the lowest index among distance ties
                if not used[u] and d2[u] < bd:
                    bd = d2[u]
                    best = u
            ov[v, j] = best
            used[best] = 1
    return out
