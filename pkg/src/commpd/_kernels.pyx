# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops. See ``_kernels_py`` for the reference semantics."""

import numpy as np
cimport numpy as cnp

cnp.import_array()

cdef double TOL = 1e-9

GRIM, ALWAYS_DEFECT, TIT_FOR_TAT = 0, 1, 2


def mwu_exact_counts(ranks, Py_ssize_t n_a, double rank_sum):
    cdef double[::1] r = np.ascontiguousarray(ranks, dtype=np.float64)
    cdef Py_ssize_t N = r.shape[0]
    cdef Py_ssize_t i, j
    cdef long long n_ge = 0, n_le = 0, total = 0
    cdef double s
    if n_a < 0 or n_a > N:
        return 0, 0, 0
    cdef Py_ssize_t[::1] idx = np.arange(n_a, dtype=np.intp)
    while True:
        # sum in index order, same as itertools.combinations in the fallback
        s = 0.0
        for j in range(n_a):
            s += r[idx[j]]
        if s >= rank_sum - TOL:
            n_ge += 1
        if s <= rank_sum + TOL:
            n_le += 1
        total += 1
        # advance to the next combination in lexicographic order
        i = n_a - 1
        while i >= 0 and idx[i] == i + N - n_a:
            i -= 1
        if i < 0:
            break
        idx[i] += 1
        for j in range(i + 1, n_a):
            idx[j] = idx[j - 1] + 1
    return n_ge, n_le, total


def nearest_centroid(X, C):
    cdef double[:, ::1] x = np.ascontiguousarray(X, dtype=np.float64)
    cdef double[:, ::1] c = np.ascontiguousarray(C, dtype=np.float64)
    cdef Py_ssize_t n = x.shape[0], k = c.shape[0], d = x.shape[1]
    cdef Py_ssize_t i, m, j, best
    cdef double acc, diff, best_d
    labels = np.empty(n, dtype=np.int64)
    dist = np.empty(n, dtype=np.float64)
    cdef long long[::1] lab = labels
    cdef double[::1] dd = dist
    for i in range(n):
        best = 0
        best_d = 0.0
        for m in range(k):
            acc = 0.0
            for j in range(d):
                diff = x[i, j] - c[m, j]
                acc = acc + diff * diff
            if m == 0 or acc < best_d:
                best = m
                best_d = acc
        lab[i] = best
        dd[i] = best_d
    return labels, dist


def play_supergame(kinds, partners, Py_ssize_t n_rounds):
    cdef long long[::1] kd = np.ascontiguousarray(kinds, dtype=np.int64)
    cdef long long[::1] pt = np.ascontiguousarray(partners, dtype=np.int64)
    cdef Py_ssize_t n = kd.shape[0]
    cdef Py_ssize_t i, r
    actions = np.zeros((n, n_rounds), dtype=np.int8)
    cdef signed char[:, ::1] a = actions
    cdef unsigned char[::1] trig = np.zeros(n, dtype=np.uint8)
    for r in range(n_rounds):
        for i in range(n):
            if kd[i] == 0:
                a[i, r] = 0 if trig[i] else 1
            elif kd[i] == 2:
                a[i, r] = 1 if r == 0 else a[pt[i], r - 1]
            else:
                a[i, r] = 0
        for i in range(n):
            if a[pt[i], r] == 0:
                trig[i] = 1
    return actions
