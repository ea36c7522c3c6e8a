# cython: boundscheck=False, wraparound=False, initializedcheck=False
"""Compiled policy kernels.

Bit-compatible twin of ``pure.py``: identical operation order on IEEE-754
doubles, so results match the fallback exactly. Keep both files in sync.
"""

from libc.math cimport exp as c_exp
from libc.stdint cimport int64_t

import numpy as np


def softmax(double[::1] w):
    cdef Py_ssize_t n = w.shape[0]
    cdef Py_ssize_t i
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef double m = w[0]
    cdef double s = 0.0
    for i in range(1, n):
        if w[i] > m:
            m = w[i]
    for i in range(n):
        out[i] = c_exp(w[i] - m)
        s += out[i]
    for i in range(n):
        out[i] = out[i] / s
    return out_arr


def sample_index(double[::1] w, double u):
    cdef Py_ssize_t n = w.shape[0]
    cdef Py_ssize_t i
    e_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] e = e_arr
    cdef double m = w[0]
    cdef double s = 0.0
    cdef double target
    cdef double acc = 0.0
    for i in range(1, n):
        if w[i] > m:
            m = w[i]
    for i in range(n):
        e[i] = c_exp(w[i] - m)
        s += e[i]
    target = u * s
    for i in range(n):
        acc += e[i]
        if target < acc:
            return i
    return n - 1


def adapt_weights(double[::1] w, int64_t[::1] sequence, double alpha,
                  bint from_updated, double clamp):
    cdef Py_ssize_t n = w.shape[0]
    cdef Py_ssize_t steps = sequence.shape[0]
    cdef Py_ssize_t i, t
    cdef int64_t a
    out_arr = np.empty(n, dtype=np.float64)
    e_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef double[::1] e = e_arr
    cdef double m, s
    for i in range(n):
        out[i] = w[i]
    if not from_updated:
        m = w[0]
        for i in range(1, n):
            if w[i] > m:
                m = w[i]
        s = 0.0
        for i in range(n):
            e[i] = c_exp(w[i] - m)
            s += e[i]
        for t in range(steps):
            a = sequence[t]
            for i in range(n):
                out[i] -= alpha * (e[i] / s)
            out[a] += alpha
    else:
        for t in range(steps):
            a = sequence[t]
            m = out[0]
            for i in range(1, n):
                if out[i] > m:
                    m = out[i]
            s = 0.0
            for i in range(n):
                e[i] = c_exp(out[i] - m)
                s += e[i]
            for i in range(n):
                out[i] -= alpha * (e[i] / s)
            out[a] += alpha
    if clamp > 0.0:
        for i in range(n):
            if out[i] > clamp:
                out[i] = clamp
            elif out[i] < -clamp:
                out[i] = -clamp
    return out_arr
