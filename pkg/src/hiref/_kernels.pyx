# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops.

Every function here has a numpy twin in :mod:`hiref._fallback` with the same
signature and semantics; :mod:`hiref._backend` picks one at import time.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, fabs, INFINITY

cnp.import_array()


def sinkhorn_rect(const double[:, ::1] log_k, const double[::1] a,
                  const double[::1] b, double[::1] v, double tol, long max_iter):
    """Log-domain matrix scaling of ``exp(log_k)`` to marginals ``(a, b)``.

    Finds ``u`` (length n) and updates ``v`` (length r) in place so that
    ``P = exp(log_k + u[:, None] + v[None, :])`` has row sums ``a`` exactly and
    column sums within ``tol`` of ``b`` in L1.  Each sweep costs a single
    ``exp`` per entry: the column sums come out of the row normalisation.

    Returns ``(u, residual, n_iter)``.
    """
    cdef Py_ssize_t n = log_k.shape[0]
    cdef Py_ssize_t r = log_k.shape[1]
    cdef Py_ssize_t i, z
    cdef long it = 0
    cdef double mx, s, t, w, residual = INFINITY
    u_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] u = u_arr
    cdef double[::1] e = np.empty(r, dtype=np.float64)
    cdef double[::1] col = np.empty(r, dtype=np.float64)
    cdef double[::1] log_a = np.log(np.asarray(a))
    cdef double[::1] log_b = np.log(np.asarray(b))

    with nogil:
        while it < max_iter:
            it += 1
            for z in range(r):
                col[z] = 0.0
            for i in range(n):
                mx = -INFINITY
                for z in range(r):
                    t = log_k[i, z] + v[z]
                    e[z] = t
                    if t > mx:
                        mx = t
                s = 0.0
                for z in range(r):
                    e[z] = exp(e[z] - mx)
                    s += e[z]
                u[i] = log_a[i] - mx - log(s)
                w = a[i] / s
                for z in range(r):
                    col[z] += w * e[z]
            residual = 0.0
            for z in range(r):
                residual += fabs(col[z] - b[z])
            if residual <= tol:
                break
            for z in range(r):
                if col[z] > 0.0:
                    v[z] += log_b[z] - log(col[z])
                else:
                    v[z] = _col_lse_update(log_k, u, log_b[z], z, n)
    return u_arr, residual, it


cdef double _col_lse_update(const double[:, ::1] log_k, double[::1] u,
                            double log_bz, Py_ssize_t z, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t i
    cdef double mx = -INFINITY, s = 0.0, t
    for i in range(n):
        t = log_k[i, z] + u[i]
        if t > mx:
            mx = t
    if mx == -INFINITY:
        return 0.0
    for i in range(n):
        s += exp(log_k[i, z] + u[i] - mx)
    return log_bz - mx - log(s)


def lsap(const double[:, ::1] cost):
    """Minimum-cost perfect matching on a square matrix.

    Shortest augmenting paths with row/column potentials, O(n^3).  Ties go
    to the lowest column index.  Returns ``perm`` with ``perm[i]`` the column
    matched to row ``i``.
    """
    cdef Py_ssize_t n = cost.shape[0]
    cdef Py_ssize_t i, j, i0, j0, j1
    cdef double delta, cur
    u_arr = np.zeros(n + 1, dtype=np.float64)
    v_arr = np.zeros(n + 1, dtype=np.float64)
    cdef double[::1] u = u_arr
    cdef double[::1] v = v_arr
    cdef Py_ssize_t[::1] p = np.zeros(n + 1, dtype=np.intp)
    cdef Py_ssize_t[::1] way = np.zeros(n + 1, dtype=np.intp)
    cdef double[::1] minv = np.empty(n + 1, dtype=np.float64)
    cdef char[::1] used = np.zeros(n + 1, dtype=np.int8)
    perm_arr = np.empty(n, dtype=np.int64)
    cdef long long[::1] perm = perm_arr

    with nogil:
        for i in range(1, n + 1):
            p[0] = i
            j0 = 0
            for j in range(n + 1):
                minv[j] = INFINITY
                used[j] = 0
            while True:
                used[j0] = 1
                i0 = p[j0]
                delta = INFINITY
                j1 = 0
                for j in range(1, n + 1):
                    if not used[j]:
                        cur = cost[i0 - 1, j - 1] - u[i0] - v[j]
                        if cur < minv[j]:
                            minv[j] = cur
                            way[j] = j0
                        if minv[j] < delta:
                            delta = minv[j]
                            j1 = j
                for j in range(n + 1):
                    if used[j]:
                        u[p[j]] += delta
                        v[j] -= delta
                    else:
                        minv[j] -= delta
                j0 = j1
                if p[j0] == 0:
                    break
            while True:
                j1 = way[j0]
                p[j0] = p[j1]
                j0 = j1
                if j0 == 0:
                    break
        for j in range(1, n + 1):
            perm[p[j] - 1] = j - 1
    return perm_arr


def greedy_capacity(const double[:, ::1] weights, const long long[::1] order,
                    const long long[::1] capacities):
    """Visit rows in ``order``; give each its heaviest cluster with room left."""
    cdef Py_ssize_t n = weights.shape[0]
    cdef Py_ssize_t r = weights.shape[1]
    cdef Py_ssize_t k, i, z, best
    cdef double bw
    labels_arr = np.empty(n, dtype=np.int64)
    cdef long long[::1] labels = labels_arr
    cdef long long[::1] room = np.array(capacities, dtype=np.int64)

    with nogil:
        for k in range(n):
            i = order[k]
            best = -1
            bw = -INFINITY
            for z in range(r):
                if room[z] > 0 and (best < 0 or weights[i, z] > bw):
                    best = z
                    bw = weights[i, z]
            labels[i] = best
            room[best] -= 1
    return labels_arr
