# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels; mirrors `cobar.kernels._python` operation for
operation so both backends produce identical merge trees."""

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY

cnp.import_array()


def ward_linkage(object d2_in):
    """See `cobar.kernels._python.ward_linkage`."""
    cdef cnp.ndarray[cnp.float64_t, ndim=2] D = np.array(d2_in, dtype=np.float64, copy=True, order="C")
    cdef Py_ssize_t n = D.shape[0]
    if D.shape[1] != n:
        raise ValueError("distance matrix must be square, got (%d, %d)" % (D.shape[0], D.shape[1]))

    merges_arr = np.empty((n - 1 if n > 1 else 0, 2), dtype=np.int64)
    heights_arr = np.empty(n - 1 if n > 1 else 0, dtype=np.float64)
    if n < 2:
        return merges_arr, heights_arr

    cdef cnp.ndarray[cnp.int64_t, ndim=2] M = merges_arr
    cdef cnp.ndarray[cnp.float64_t, ndim=1] H = heights_arr
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] active = np.ones(n, dtype=np.uint8)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] node_id = np.arange(n, dtype=np.int64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] size = np.ones(n, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] row_min = np.empty(n, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] new_d = np.empty(n, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] old_i = np.empty(n, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] old_j = np.empty(n, dtype=np.float64)

    cdef Py_ssize_t m, r, c, i, j, k, best_r, best_c
    cdef double g, v, si, sj, sk, si_sj, nd
    cdef long long ida, idb, lo, hi, best_lo, best_hi

    for r in range(n):
        D[r, r] = INFINITY
    for r in range(n):
        g = INFINITY
        for c in range(n):
            v = D[r, c]
            if v < g:
                g = v
        row_min[r] = g

    for m in range(n - 1):
        g = INFINITY
        for r in range(n):
            if active[r] and row_min[r] < g:
                g = row_min[r]

        best_lo = -1
        best_hi = -1
        best_r = -1
        best_c = -1
        for r in range(n):
            if active[r] and row_min[r] == g:
                for c in range(n):
                    if D[r, c] == g:
                        ida = node_id[r]
                        idb = node_id[c]
                        if ida < idb:
                            lo = ida
                            hi = idb
                        else:
                            lo = idb
                            hi = ida
                        if best_lo < 0 or lo < best_lo or (lo == best_lo and hi < best_hi):
                            best_lo = lo
                            best_hi = hi
                            if r < c:
                                best_r = r
                                best_c = c
                            else:
                                best_r = c
                                best_c = r
        i = best_r
        j = best_c
        M[m, 0] = best_lo
        M[m, 1] = best_hi
        H[m] = g

        si = size[i]
        sj = size[j]
        si_sj = si + sj
        for k in range(n):
            if k == i or k == j or not active[k]:
                continue
            sk = size[k]
            nd = ((si + sk) * D[i, k] + (sj + sk) * D[j, k] - sk * g) / (si_sj + sk)
            if nd < 0.0:
                nd = 0.0
            new_d[k] = nd
            old_i[k] = D[k, i]
            old_j[k] = D[k, j]

        for c in range(n):
            D[i, c] = INFINITY
            D[c, i] = INFINITY
            D[j, c] = INFINITY
            D[c, j] = INFINITY
        for k in range(n):
            if k == i or k == j or not active[k]:
                continue
            D[i, k] = new_d[k]
            D[k, i] = new_d[k]

        active[j] = 0
        size[i] = si_sj
        node_id[i] = n + m

        for k in range(n):
            if k == i or not active[k]:
                continue
            if D[k, i] < row_min[k]:
                row_min[k] = D[k, i]
            elif row_min[k] == old_i[k] or row_min[k] == old_j[k]:
                g = INFINITY
                for c in range(n):
                    v = D[k, c]
                    if v < g:
                        g = v
                row_min[k] = g
        g = INFINITY
        for c in range(n):
            v = D[i, c]
            if v < g:
                g = v
        row_min[i] = g

    return merges_arr, heights_arr


def mf_sgd_epoch(
    cnp.ndarray[cnp.int32_t, ndim=1] users,
    cnp.ndarray[cnp.int32_t, ndim=1] items,
    cnp.ndarray[cnp.float64_t, ndim=1] ratings,
    cnp.ndarray[cnp.int64_t, ndim=1] order,
    cnp.ndarray[cnp.float64_t, ndim=2] user_factors,
    cnp.ndarray[cnp.float64_t, ndim=2] item_factors,
    cnp.ndarray[cnp.float64_t, ndim=1] user_bias,
    cnp.ndarray[cnp.float64_t, ndim=1] item_bias,
    double global_mean,
    double learning_rate,
    double regularization,
):
    """See `cobar.kernels._python.mf_sgd_epoch`."""
    cdef Py_ssize_t t, idx, u, i, f
    cdef Py_ssize_t n_factors = user_factors.shape[1]
    cdef double pred, err, pf, qf

    for t in range(order.shape[0]):
        idx = order[t]
        u = users[idx]
        i = items[idx]
        pred = global_mean + user_bias[u] + item_bias[i]
        for f in range(n_factors):
            pred += user_factors[u, f] * item_factors[i, f]
        err = ratings[idx] - pred
        user_bias[u] += learning_rate * (err - regularization * user_bias[u])
        item_bias[i] += learning_rate * (err - regularization * item_bias[i])
        for f in range(n_factors):
            pf = user_factors[u, f]
            qf = item_factors[i, f]
            user_factors[u, f] = pf + learning_rate * (err * qf - regularization * pf)
            item_factors[i, f] = qf + learning_rate * (err * pf - regularization * qf)
