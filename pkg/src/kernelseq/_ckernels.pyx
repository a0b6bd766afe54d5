# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled pairwise-distance and Gaussian kernels.

Same signatures and semantics as ``kernelseq._kernels_py``.
"""
import numpy as np


def sq_dists(A):
    cdef const double[:, ::1] a = np.ascontiguousarray(A, dtype=np.float64)
    cdef Py_ssize_t n = a.shape[0], q = a.shape[1], i, j, k
    out = np.zeros((n, n), dtype=np.float64)
    cdef double[:, ::1] d = out
    cdef double s, t
    with nogil:
        for i in range(n):
            for j in range(i + 1, n):
                s = 0.0
                for k in range(q):
                    t = a[i, k] - a[j, k]
                    s += t * t
                d[i, j] = s
                d[j, i] = s
    return out


def cross_sq_dists(A, B):
    cdef const double[:, ::1] a = np.ascontiguousarray(A, dtype=np.float64)
    cdef const double[:, ::1] b = np.ascontiguousarray(B, dtype=np.float64)
    cdef Py_ssize_t n = a.shape[0], m = b.shape[0], q = a.shape[1], i, j, k
    if b.shape[1] != q:
        raise ValueError("column count mismatch")
    out = np.empty((n, m), dtype=np.float64)
    cdef double[:, ::1] d = out
    cdef double s, t
    with nogil:
        for i in range(n):
            for j in range(m):
                s = 0.0
                for k in range(q):
                    t = a[i, k] - b[j, k]
                    s += t * t
                d[i, j] = s
    return out


def gaussian_gram(A, double sigma):
    # distances in the compiled loop, exponentials through numpy's vectorized exp
    out = sq_dists(A)
    np.multiply(out, -0.5 / (sigma * sigma), out=out)
    return np.exp(out, out=out)


def cross_gaussian(A, B, double sigma):
    out = cross_sq_dists(A, B)
    np.multiply(out, -0.5 / (sigma * sigma), out=out)
    return np.exp(out, out=out)


def separation_curve(d2_same, d2_diff, sigmas):
    ds = np.ascontiguousarray(d2_same, dtype=np.float64)
    dd = np.ascontiguousarray(d2_diff, dtype=np.float64)
    cdef const double[::1] sg = np.ascontiguousarray(sigmas, dtype=np.float64)
    cdef Py_ssize_t m = sg.shape[0], k
    out = np.empty(m, dtype=np.float64)
    cdef double[::1] o = out
    cdef double c
    # reuse two buffers across all bandwidths
    bs = np.empty_like(ds)
    bd = np.empty_like(dd)
    for k in range(m):
        c = -0.5 / (sg[k] * sg[k])
        np.multiply(ds, c, out=bs)
        np.multiply(dd, c, out=bd)
        o[k] = np.exp(bs, out=bs).mean() - np.exp(bd, out=bd).mean()
    return out
