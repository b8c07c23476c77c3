# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled Dykstra projection onto an intersection of halfspaces."""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()


def dykstra_halfspaces(double[:, ::1] A, double[::1] b, double[::1] x0,
                       int max_iter=10000, double tol=1e-10):
    cdef Py_ssize_t m = A.shape[0]
    cdef Py_ssize_t d = A.shape[1]
    cdef Py_ssize_t i, j
    cdef int it
    cdef double viol, step, change, resid, s
    x_arr = np.array(x0, dtype=np.float64, copy=True)
    p_arr = np.zeros((m, d), dtype=np.float64)
    y_arr = np.empty(d, dtype=np.float64)
    cdef double[::1] x = x_arr
    cdef double[:, ::1] p = p_arr
    cdef double[::1] y = y_arr
    it = 0
    while it < max_iter:
        it += 1
        change = 0.0
        for i in range(m):
            viol = -b[i]
            for j in range(d):
                y[j] = x[j] + p[i, j]
                viol += A[i, j] * y[j]
            step = viol if viol > 0.0 else 0.0
            for j in range(d):
                s = y[j] - step * A[i, j]
                change += (s - x[j]) * (s - x[j])
                p[i, j] = y[j] - s
                x[j] = s
        if sqrt(change) <= tol:
            break
    resid = 0.0
    for i in range(m):
        viol = -b[i]
        for j in range(d):
            viol += A[i, j] * x[j]
        if viol > resid:
            resid = viol
    return x_arr, it, resid
