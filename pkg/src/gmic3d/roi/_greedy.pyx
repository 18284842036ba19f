# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled greedy window selection kernel.

Mirrors ``_greedy_py.greedy_select`` exactly: argmax with strict ``>``
comparison over C-order traversal gives the lexicographically smallest
(d, i, j) among ties.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


cdef void _slice_window_sums(double[:, :, ::1] a, double[:, :, ::1] sums,
                             Py_ssize_t d, Py_ssize_t win_h, Py_ssize_t win_w) noexcept nogil:
    cdef Py_ssize_t h = a.shape[1]
    cdef Py_ssize_t w = a.shape[2]
    cdef Py_ssize_t i, j, ii, jj
    cdef double acc
    for i in range(h - win_h + 1):
        for j in range(w - win_w + 1):
            acc = 0.0
            for ii in range(win_h):
                for jj in range(win_w):
                    acc += a[d, i + ii, j + jj]
            sums[d, i, j] = acc


def greedy_select(a_star, Py_ssize_t win_h, Py_ssize_t win_w,
                  Py_ssize_t k, Py_ssize_t zeta):
    """Select `k` windows greedily from a (D, h, w) map.

    Same contract as the pure-NumPy fallback.
    """
    a_arr = np.ascontiguousarray(a_star, dtype=np.float64).copy()
    cdef double[:, :, ::1] a = a_arr
    cdef Py_ssize_t depth = a.shape[0]
    cdef Py_ssize_t h = a.shape[1]
    cdef Py_ssize_t w = a.shape[2]
    if win_h > h or win_w > w:
        raise ValueError(f"window {win_h}x{win_w} larger than slice {h}x{w}")

    sums_arr = np.empty((depth, h - win_h + 1, w - win_w + 1), dtype=np.float64)
    cdef double[:, :, ::1] sums = sums_arr
    picks_arr = np.empty((k, 3), dtype=np.int64)
    scores_arr = np.empty(k, dtype=np.float64)
    cdef cnp.int64_t[:, ::1] picks = picks_arr
    cdef double[::1] scores = scores_arr

    cdef Py_ssize_t n, d, i, j, bd, bi, bj, lo, hi, ii, jj
    cdef double best

    with nogil:
        for d in range(depth):
            _slice_window_sums(a, sums, d, win_h, win_w)

        for n in range(k):
            best = sums[0, 0, 0]
            bd = bi = bj = 0
            for d in range(depth):
                for i in range(h - win_h + 1):
                    for j in range(w - win_w + 1):
                        if sums[d, i, j] > best:
                            best = sums[d, i, j]
                            bd = d
                            bi = i
                            bj = j
            picks[n, 0] = bd
            picks[n, 1] = bi
            picks[n, 2] = bj
            scores[n] = best

            lo = bd - zeta
            if lo < 0:
                lo = 0
            hi = bd + zeta
            if hi > depth - 1:
                hi = depth - 1
            for d in range(lo, hi + 1):
                for ii in range(win_h):
                    for jj in range(win_w):
                        a[d, bi + ii, bj + jj] = 0.0
                _slice_window_sums(a, sums, d, win_h, win_w)

    return picks_arr, scores_arr
