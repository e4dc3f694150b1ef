# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled walk kernel; see ``dronemob._walk_py`` for the reference version."""

from libc.math cimport cos, sin

import numpy as np


def advance_walks(double[:, ::1] lengths, double[:, ::1] angles, double[:, ::1] hovers,
                  double v, double[::1] times,
                  double[::1] x, double[::1] y, double[::1] clock, long long[::1] tidx,
                  double[:, ::1] out_x, double[:, ::1] out_y):
    cdef Py_ssize_t n = lengths.shape[0]
    cdef Py_ssize_t k_max = lengths.shape[1]
    cdef Py_ssize_t m = times.shape[0]
    cdef Py_ssize_t i, k
    cdef long long j
    cdef double t0, t1, c, s, frac
    for i in range(n):
        j = tidx[i]
        for k in range(k_max):
            if j >= m:
                break
            # hover before the flight
            t0 = clock[i] + hovers[i, k]
            while j < m and times[j] <= t0:
                out_x[i, j] = x[i]
                out_y[i, j] = y[i]
                j += 1
            clock[i] = t0
            t1 = t0 + lengths[i, k] / v
            c = cos(angles[i, k])
            s = sin(angles[i, k])
            while j < m and times[j] <= t1:
                frac = (times[j] - t0) * v
                out_x[i, j] = x[i] + frac * c
                out_y[i, j] = y[i] + frac * s
                j += 1
            x[i] = x[i] + lengths[i, k] * c
            y[i] = y[i] + lengths[i, k] * s
            clock[i] = t1
        tidx[i] = j
