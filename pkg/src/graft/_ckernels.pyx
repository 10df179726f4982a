# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops. Must stay numerically identical to ``_pykernels``."""

import numpy as np


def pav_decreasing(const double[::1] y, const double[::1] w):
    """Weighted least-squares fit of ``y`` onto the non-increasing cone.

    Returns ``(fitted, block_ids)``; ``block_ids[i]`` labels the pooled block
    that element ``i`` ended up in (0, 1, ... from the left).
    """
    cdef Py_ssize_t n = y.shape[0]
    cdef double[::1] sums = np.empty(n)
    cdef double[::1] weights = np.empty(n)
    cdef Py_ssize_t[::1] starts = np.empty(n, dtype=np.intp)
    cdef Py_ssize_t top = -1
    cdef Py_ssize_t i, b, k

    for i in range(n):
        top += 1
        sums[top] = w[i] * y[i]
        weights[top] = w[i]
        starts[top] = i
        while top > 0 and sums[top - 1] / weights[top - 1] < sums[top] / weights[top]:
            sums[top - 1] += sums[top]
            weights[top - 1] += weights[top]
            top -= 1

    fitted = np.empty(n)
    block_ids = np.empty(n, dtype=np.intp)
    cdef double[::1] out = fitted
    cdef Py_ssize_t[::1] ids = block_ids
    cdef Py_ssize_t stop
    cdef double value
    for b in range(top + 1):
        stop = starts[b + 1] if b < top else n
        value = sums[b] / weights[b]
        for k in range(starts[b], stop):
            out[k] = value
            ids[k] = b
    return fitted, block_ids


def concordance_counts(const double[::1] scores, const double[::1] times, const long long[::1] events):
    """Count (concordant, tied, comparable) pairs; higher score = longer survival."""
    cdef Py_ssize_t n = scores.shape[0]
    cdef Py_ssize_t i, j
    cdef long long concordant = 0, tied = 0, comparable = 0
    cdef double ti, si
    for i in range(n):
        if events[i] == 0:
            continue
        ti = times[i]
        si = scores[i]
        for j in range(n):
            if times[j] > ti:
                comparable += 1
                if scores[j] > si:
                    concordant += 1
                elif scores[j] == si:
                    tied += 1
    return concordant, tied, comparable
