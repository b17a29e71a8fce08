# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels for regression-tree fitting and evaluation.

Must stay bitwise-identical to the NumPy fallback in _split_py.py: prefix
sums accumulate left to right, scores use the same expression, and the best
cut is the first strict maximum of the scan.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY, NAN

cnp.import_array()

NO_SPLIT = (-float("inf"), -1, float("nan"))


def best_split_scan(double[::1] values, double[::1] targets, Py_ssize_t min_leaf):
    """Same contract as _split_py.best_split_scan."""
    cdef Py_ssize_t n = values.shape[0]
    if n < 2 * min_leaf:
        return NO_SPLIT

    cdef double total = 0.0
    cdef Py_ssize_t i
    for i in range(n):
        total += targets[i]

    cdef double s_left = 0.0
    cdef double s_right, score, n_left, n_right
    cdef double best = -INFINITY
    cdef Py_ssize_t best_cut = -1
    for i in range(n - 1):
        s_left += targets[i]
        if i + 1 < min_leaf:
            continue
        if n - i - 1 < min_leaf:
            break
        if not values[i] < values[i + 1]:
            continue
        s_right = total - s_left
        n_left = <double> (i + 1)
        n_right = <double> (n - i - 1)
        score = s_left * s_left / n_left + s_right * s_right / n_right
        if score > best:
            best = score
            best_cut = i

    if best_cut < 0:
        return NO_SPLIT

    cdef double lo = values[best_cut]
    cdef double hi = values[best_cut + 1]
    cdef double threshold = (lo + hi) / 2.0
    if threshold >= hi:
        threshold = lo
    return best, best_cut + 1, threshold


def apply_tree(int[::1] feature, double[::1] threshold, int[::1] left,
               int[::1] right, double[::1] value, double[:, ::1] x):
    """Same contract as _split_py.apply_tree."""
    cdef Py_ssize_t n = x.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(n, dtype=np.float64)
    cdef Py_ssize_t i
    cdef int node
    for i in range(n):
        node = 0
        while feature[node] >= 0:
            if x[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = value[node]
    return out
