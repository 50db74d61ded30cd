# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Cython kernels: lag-1 recurrence and backward random walks.

Contracts match causemine._kernels._pykernels exactly, including float
accumulation order and random-number consumption, so backends are
interchangeable.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def var1_recurrence(coef, innovations):
    coef_arr = np.ascontiguousarray(coef, dtype=np.float64)
    inov_arr = np.ascontiguousarray(innovations, dtype=np.float64)
    horizon, n = inov_arr.shape
    if coef_arr.shape != (n, n):
        raise ValueError(f"coef shape {coef_arr.shape} incompatible with {n} nodes")
    out = np.empty_like(inov_arr)

    cdef double[:, ::1] c = coef_arr
    cdef double[:, ::1] e = inov_arr
    cdef double[:, ::1] x = out
    cdef Py_ssize_t t, i, j, nn = n, T = horizon
    cdef double prev_j

    for i in range(nn):
        x[0, i] = e[0, i]
    for t in range(1, T):
        for i in range(nn):
            x[t, i] = e[t, i]
        for j in range(nn):
            prev_j = x[t - 1, j]
            for i in range(nn):
                x[t, i] = x[t, i] + prev_j * c[j, i]
    return out


def run_walks(indptr, parents, cum_weights, anomaly, restart_prob, max_steps, uniforms):
    indptr_arr = np.ascontiguousarray(indptr, dtype=np.int64)
    parents_arr = np.ascontiguousarray(parents, dtype=np.int64)
    cum_arr = np.ascontiguousarray(cum_weights, dtype=np.float64)
    uni_arr = np.ascontiguousarray(uniforms, dtype=np.float64)
    n = len(indptr_arr) - 1
    visits = np.zeros(n, dtype=np.int64)

    cdef long long[::1] ip = indptr_arr
    cdef long long[::1] par = parents_arr
    cdef double[::1] cw = cum_arr
    cdef double[:, :, ::1] uni = uni_arr
    cdef long long[::1] vis = visits
    cdef Py_ssize_t w, s, k, lo, hi, cur
    cdef Py_ssize_t start = anomaly, steps = max_steps, n_walks = uni_arr.shape[0]
    cdef double rp = restart_prob, total, u

    for w in range(n_walks):
        cur = start
        for s in range(steps):
            if uni[w, s, 0] < rp:
                cur = start
                continue
            lo = ip[cur]
            hi = ip[cur + 1]
            if lo == hi:
                vis[cur] += 1
                break
            total = cw[hi - 1]
            u = uni[w, s, 1] * total
            k = lo
            while k < hi - 1 and cw[k] <= u:
                k += 1
            cur = par[k]
            vis[cur] += 1
    return visits
