# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the hot kernels (Jaro similarity, GRU scan).

Mirrors _pykernels exactly; see that module for the semantics.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, tanh
from scipy.linalg.cython_blas cimport dgemv

cnp.import_array()


def jaro(a, b):
    """Jaro similarity of two strings, in [0, 1]."""
    cdef Py_ssize_t la = len(a)
    cdef Py_ssize_t lb = len(b)
    if la == 0 and lb == 0:
        return 1.0
    if la == 0 or lb == 0:
        return 0.0

    cdef cnp.ndarray[cnp.int32_t, ndim=1] ca = np.fromiter(
        (ord(ch) for ch in a), dtype=np.int32, count=la)
    cdef cnp.ndarray[cnp.int32_t, ndim=1] cb = np.fromiter(
        (ord(ch) for ch in b), dtype=np.int32, count=lb)
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] a_matched = np.zeros(la, dtype=np.uint8)
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] b_matched = np.zeros(lb, dtype=np.uint8)

    cdef Py_ssize_t window = max(la, lb) // 2 - 1
    if window < 0:
        window = 0

    cdef Py_ssize_t i, j, lo, hi
    cdef long m = 0
    for i in range(la):
        lo = i - window
        if lo < 0:
            lo = 0
        hi = i + window + 1
        if hi > lb:
            hi = lb
        for j in range(lo, hi):
            if b_matched[j] == 0 and ca[i] == cb[j]:
                a_matched[i] = 1
                b_matched[j] = 1
                m += 1
                break
    if m == 0:
        return 0.0

    cdef long k = 0
    j = 0
    for i in range(la):
        if a_matched[i]:
            while b_matched[j] == 0:
                j += 1
            if ca[i] != cb[j]:
                k += 1
            j += 1
    return ((<double>m) / la + (<double>m) / lb
            + (m - k / 2.0) / m) / 3.0


def gru_sequence(x, w_h, u_h, b_h, w_z, u_z, b_z, w_r, u_r, b_r):
    """Run a GRU over a T x d input; returns (h, r, z, hc), each T x H.

    The input projections W x_t are batched through one matrix product per
    gate up front; the recurrence multiplies the stacked [U_r; U_z; U_h]
    matrix against h_prev with one BLAS call per step, and the gate
    nonlinearities run in C.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    # T x H input contributions, one BLAS product per gate
    cdef double[:, ::1] wx_h = x @ np.ascontiguousarray(
        w_h, dtype=np.float64).T + np.ascontiguousarray(b_h, dtype=np.float64)
    cdef double[:, ::1] wx_z = x @ np.ascontiguousarray(
        w_z, dtype=np.float64).T + np.ascontiguousarray(b_z, dtype=np.float64)
    cdef double[:, ::1] wx_r = x @ np.ascontiguousarray(
        w_r, dtype=np.float64).T + np.ascontiguousarray(b_r, dtype=np.float64)
    cdef double[:, ::1] ustack = np.ascontiguousarray(
        np.vstack([u_r, u_z, u_h]), dtype=np.float64)

    cdef Py_ssize_t t_len = x.shape[0]
    cdef Py_ssize_t hidden = wx_h.shape[1]

    h_arr = np.zeros((t_len, hidden))
    r_arr = np.zeros((t_len, hidden))
    z_arr = np.zeros((t_len, hidden))
    hc_arr = np.zeros((t_len, hidden))
    cdef double[:, ::1] h = h_arr
    cdef double[:, ::1] r = r_arr
    cdef double[:, ::1] z = z_arr
    cdef double[:, ::1] hc = hc_arr

    cdef double[::1] h_prev = np.zeros(hidden)
    cdef double[::1] uh = np.zeros(3 * hidden)

    # y = A @ x for row-major A is dgemv with the transposed column-major view
    cdef int bm = <int>hidden          # BLAS rows of the column-major view
    cdef int bn = <int>(3 * hidden)    # BLAS cols = rows of the stacked matrix
    cdef int inc = 1
    cdef double one = 1.0, zero = 0.0

    cdef Py_ssize_t t, i
    cdef double hc_i
    for t in range(t_len):
        dgemv("t", &bm, &bn, &one, &ustack[0, 0], &bm, &h_prev[0], &inc,
              &zero, &uh[0], &inc)
        for i in range(hidden):
            r[t, i] = 1.0 / (1.0 + exp(-(wx_r[t, i] + uh[i])))
            z[t, i] = 1.0 / (1.0 + exp(-(wx_z[t, i] + uh[hidden + i])))
            hc_i = tanh(wx_h[t, i] + r[t, i] * uh[2 * hidden + i])
            hc[t, i] = hc_i
            h[t, i] = (1.0 - z[t, i]) * h_prev[i] + z[t, i] * hc_i
        for i in range(hidden):
            h_prev[i] = h[t, i]
    return h_arr, r_arr, z_arr, hc_arr
