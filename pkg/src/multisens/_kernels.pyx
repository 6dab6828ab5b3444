# cython: language_level=3
"""Compiled versions of the kernels in ``_kernels_py``."""
import numpy as np
from libc.math cimport sqrt, fabs, isfinite


cdef enum:
    ROW_BLOCK = 16


def ou_integrate(const double[::1] f, const double[:, ::1] noise, double z0, double v0,
                 double eps, double dt_macro, double dt_micro, Py_ssize_t n_micro,
                 bint window_average):
    cdef Py_ssize_t n = f.shape[0]
    cdef Py_ssize_t n_macro = noise.shape[1] // n_micro
    cdef double scale = sqrt(dt_micro) / sqrt(eps)
    out_arr = np.empty((n, n_macro))
    cdef double[:, ::1] out = out_arr
    cdef double z[ROW_BLOCK]
    cdef double v[ROW_BLOCK]
    cdef double acc[ROW_BLOCK]
    cdef Py_ssize_t r0, r, m, k, j, step
    cdef double vbar
    # rows are independent; stepping a block of them together hides the
    # latency of each row's serial recurrence without reordering its operations
    for r0 in range(0, n, ROW_BLOCK):
        m = min(ROW_BLOCK, n - r0)
        for r in range(m):
            z[r] = z0
            v[r] = v0
        for k in range(n_macro):
            for r in range(m):
                acc[r] = 0.0
            for j in range(n_micro):
                step = k * n_micro + j
                for r in range(m):
                    v[r] = v[r] - (v[r] / eps) * dt_micro + scale * noise[r0 + r, step]
                    acc[r] = acc[r] + v[r]
            for r in range(m):
                if window_average:
                    vbar = acc[r] / n_micro
                else:
                    vbar = v[r]
                z[r] = z[r] + dt_macro * (vbar + f[r0 + r])
                out[r0 + r, k] = z[r]
    return out_arr


def ks_statistic(const double[::1] a, const double[::1] b):
    cdef Py_ssize_t n1 = a.shape[0], n2 = b.shape[0]
    cdef Py_ssize_t i = 0, j = 0
    cdef double x, diff, d = 0.0
    while i < n1 and j < n2:
        x = a[i] if a[i] <= b[j] else b[j]
        while i < n1 and a[i] <= x:
            i += 1
        while j < n2 and b[j] <= x:
            j += 1
        diff = fabs(<double>i / n1 - <double>j / n2)
        if diff > d:
            d = diff
    return d


def jansen_bootstrap(const double[::1] fA, const double[::1] fB, const double[:, ::1] fAB,
                     const long long[:, ::1] idx):
    cdef Py_ssize_t R = idx.shape[0], n = idx.shape[1], d = fAB.shape[0]
    out_arr = np.empty((R, d))
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t r, j, i
    cdef long long t
    cdef double s, mean, var, diff, num
    for r in range(R):
        s = 0.0
        for j in range(n):
            t = idx[r, j]
            s += fA[t] + fB[t]
        mean = s / (2 * n)
        var = 0.0
        for j in range(n):
            t = idx[r, j]
            var += (fA[t] - mean) * (fA[t] - mean) + (fB[t] - mean) * (fB[t] - mean)
        var /= (2 * n - 1)
        for i in range(d):
            num = 0.0
            for j in range(n):
                t = idx[r, j]
                diff = fA[t] - fAB[i, t]
                num += diff * diff
            out[r, i] = num / (2.0 * n) / var
    return out_arr
