# cython: language_level=3
"""Compiled inner loops: log-space forward-backward and average-linkage AHC."""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, INFINITY

cnp.import_array()


cdef inline double _lse2(double[:] buf, Py_ssize_t n) noexcept nogil:
    cdef double m = -INFINITY
    cdef double s = 0.0
    cdef Py_ssize_t i
    for i in range(n):
        if buf[i] > m:
            m = buf[i]
    if m == -INFINITY:
        return -INFINITY
    for i in range(n):
        s += exp(buf[i] - m)
    return m + log(s)


def forward_backward(const double[:, ::1] lls, const double[:, ::1] log_tr,
                     const double[::1] log_init):
    cdef Py_ssize_t T = lls.shape[0]
    cdef Py_ssize_t S = lls.shape[1]
    cdef Py_ssize_t t, i, j
    cdef double total
    lfw_arr = np.full((T, S), -np.inf)
    lbw_arr = np.full((T, S), -np.inf)
    buf_arr = np.empty(S)
    cdef double[:, ::1] lfw = lfw_arr
    cdef double[:, ::1] lbw = lbw_arr
    cdef double[:] buf = buf_arr
    with nogil:
        for j in range(S):
            lfw[0, j] = lls[0, j] + log_init[j]
        for t in range(1, T):
            for j in range(S):
                for i in range(S):
                    buf[i] = lfw[t - 1, i] + log_tr[i, j]
                lfw[t, j] = lls[t, j] + _lse2(buf, S)
        for j in range(S):
            lbw[T - 1, j] = 0.0
        for t in range(T - 2, -1, -1):
            for i in range(S):
                for j in range(S):
                    buf[j] = log_tr[i, j] + lls[t + 1, j] + lbw[t + 1, j]
                lbw[t, i] = _lse2(buf, S)
        for j in range(S):
            buf[j] = lfw[T - 1, j]
        total = _lse2(buf, S)
    gamma = np.exp(lfw_arr + lbw_arr - total)
    return gamma, total, lfw_arr, lbw_arr


cdef inline bint _better(double v, Py_ssize_t k, double bv, Py_ssize_t bk) noexcept nogil:
    return v > bv or (v == bv and k < bk)


cdef void _row_best(double[:, ::1] L, char[::1] active, Py_ssize_t n, Py_ssize_t a,
                    Py_ssize_t[::1] nn, double[::1] nv) noexcept nogil:
    cdef Py_ssize_t k, bk = -1
    cdef double bv = -INFINITY
    for k in range(n):
        if k != a and active[k] and (bk < 0 or _better(L[a, k], k, bv, bk)):
            bv = L[a, k]
            bk = k
    nn[a] = bk
    nv[a] = bv


def ahc_average(double[:, ::1] sim, double threshold, Py_ssize_t min_clusters,
                Py_ssize_t max_clusters):
    """Greedy average-linkage merge; returns the representative item per item."""
    cdef Py_ssize_t n = sim.shape[0]
    L_arr = np.array(sim, dtype=np.float64, copy=True)
    cdef double[:, ::1] L = L_arr
    active_arr = np.ones(n, dtype=np.int8)
    cdef char[::1] active = active_arr
    size_arr = np.ones(n, dtype=np.float64)
    cdef double[::1] size = size_arr
    parent_arr = np.arange(n, dtype=np.intp)
    cdef Py_ssize_t[::1] parent = parent_arr
    nn_arr = np.full(n, -1, dtype=np.intp)
    nv_arr = np.full(n, -np.inf)
    cdef Py_ssize_t[::1] nn = nn_arr
    cdef double[::1] nv = nv_arr
    cdef Py_ssize_t count = n
    cdef Py_ssize_t a, b, k, i, j, bi, bj
    cdef double best, na, nb, v
    with nogil:
        for a in range(n):
            _row_best(L, active, n, a, nn, nv)
        while count > min_clusters:
            bi = -1
            bj = -1
            best = -INFINITY
            for a in range(n):
                if not active[a] or nn[a] < 0:
                    continue
                i = a if a < nn[a] else nn[a]
                j = nn[a] if a < nn[a] else a
                if bi < 0 or nv[a] > best or (nv[a] == best and (i < bi or (i == bi and j < bj))):
                    best = nv[a]
                    bi = i
                    bj = j
            if bi < 0:
                break
            if best < threshold and count <= max_clusters:
                break
            a = bi
            b = bj
            na = size[a]
            nb = size[b]
            for k in range(n):
                if active[k] and k != a and k != b:
                    v = (na * L[a, k] + nb * L[b, k]) / (na + nb)
                    L[a, k] = v
                    L[k, a] = v
            active[b] = 0
            size[a] = na + nb
            for k in range(n):
                if parent[k] == b:
                    parent[k] = a
            count -= 1
            for k in range(n):
                if not active[k]:
                    continue
                if k == a or nn[k] == a or nn[k] == b:
                    _row_best(L, active, n, k, nn, nv)
                elif _better(L[k, a], a, nv[k], nn[k]):
                    nn[k] = a
                    nv[k] = L[k, a]
    return parent_arr
