# cython: language_level=3
"""Compiled inner loops. Signatures mirror :mod:`fedfollow._pykernels`."""

import numpy as np

cimport numpy as cnp
from libc.math cimport fabs

cnp.import_array()

BACKEND = "cython"


def mhrw_walk(const cnp.int64_t[::1] indptr, const cnp.int64_t[::1] indices,
              cnp.int64_t start, const double[::1] pick, const double[::1] accept):
    cdef Py_ssize_t steps = pick.shape[0]
    cdef cnp.ndarray[cnp.int64_t, ndim=1] out = np.empty(steps + 1, dtype=np.int64)
    cdef cnp.int64_t cur = start, cand, du, dv, j
    cdef Py_ssize_t i
    cdef long accepted = 0
    out[0] = cur
    for i in range(steps):
        du = indptr[cur + 1] - indptr[cur]
        if du > 0:
            j = <cnp.int64_t>(pick[i] * du)
            if j >= du:
                j = du - 1
            cand = indices[indptr[cur] + j]
            dv = indptr[cand + 1] - indptr[cand]
            if accept[i] * dv < du:
                cur = cand
                accepted += 1
        out[i + 1] = cur
    return out, accepted


def ego_walk(const cnp.int64_t[::1] indptr, const cnp.int64_t[::1] indices,
             cnp.int64_t seed, double gamma, const double[::1] move, const double[::1] pick):
    cdef Py_ssize_t steps = move.shape[0]
    cdef cnp.ndarray[cnp.int64_t, ndim=1] out = np.empty(steps + 1, dtype=np.int64)
    cdef cnp.int64_t cur = seed, d, j
    cdef Py_ssize_t i
    out[0] = cur
    for i in range(steps):
        d = indptr[cur + 1] - indptr[cur]
        if move[i] < gamma and d > 0:
            j = <cnp.int64_t>(pick[i] * d)
            if j >= d:
                j = d - 1
            cur = indices[indptr[cur] + j]
        else:
            cur = seed
        out[i + 1] = cur
    return out


def ppr_power(const cnp.int64_t[::1] indptr, const cnp.int64_t[::1] indices,
              cnp.int64_t seed, double damping, double tol, long max_iter):
    cdef Py_ssize_t n = indptr.shape[0] - 1
    cdef cnp.ndarray[double, ndim=1] r_arr = np.zeros(n, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] nxt_arr = np.zeros(n, dtype=np.float64)
    cdef double[::1] r = r_arr
    cdef double[::1] nxt = nxt_arr
    cdef double[::1] tmp
    cdef double share, mass, diff, mass_err = 0.0
    cdef Py_ssize_t u, p
    cdef cnp.int64_t d
    cdef long it = 0
    cdef bint converged = False
    r[seed] = 1.0
    while it < max_iter:
        it += 1
        for u in range(n):
            nxt[u] = 0.0
        for u in range(n):
            if r[u] == 0.0:
                continue
            d = indptr[u + 1] - indptr[u]
            if d == 0:
                nxt[seed] += damping * r[u]
            else:
                share = damping * r[u] / d
                for p in range(indptr[u], indptr[u + 1]):
                    nxt[indices[p]] += share
        nxt[seed] += 1.0 - damping
        mass = 0.0
        diff = 0.0
        for u in range(n):
            mass += nxt[u]
            diff += fabs(nxt[u] - r[u])
        if fabs(mass - 1.0) > mass_err:
            mass_err = fabs(mass - 1.0)
        tmp = r
        r = nxt
        nxt = tmp
        if diff < tol:
            converged = True
            break
    return np.asarray(r).copy(), it, converged, mass_err


def bm25_accumulate(const cnp.int64_t[::1] term_indptr, const cnp.int64_t[::1] post_docs,
                    const double[::1] post_tf, const cnp.int64_t[::1] query_terms,
                    const double[::1] idf, const double[::1] norm, double k1, Py_ssize_t n_docs):
    cdef cnp.ndarray[double, ndim=1] out = np.zeros(n_docs, dtype=np.float64)
    cdef double[::1] scores = out
    cdef Py_ssize_t q, p
    cdef cnp.int64_t t, doc
    cdef double tf, w
    for q in range(query_terms.shape[0]):
        t = query_terms[q]
        w = idf[t]
        for p in range(term_indptr[t], term_indptr[t + 1]):
            doc = post_docs[p]
            tf = post_tf[p]
            scores[doc] += w * (tf * (k1 + 1.0) / (tf + norm[doc]))
    return out


def triangle_counts(const cnp.int64_t[::1] indptr, const cnp.int64_t[::1] indices):
    cdef Py_ssize_t n = indptr.shape[0] - 1
    cdef cnp.ndarray[cnp.int64_t, ndim=1] out = np.zeros(n, dtype=np.int64)
    cdef Py_ssize_t u, p, a, b, a_end, b_end
    cdef cnp.int64_t v, links
    for u in range(n):
        links = 0
        for p in range(indptr[u], indptr[u + 1]):
            v = indices[p]
            # merge-intersect N(u) and N(v); each neighbour edge is seen twice
            a = indptr[u]
            a_end = indptr[u + 1]
            b = indptr[v]
            b_end = indptr[v + 1]
            while a < a_end and b < b_end:
                if indices[a] < indices[b]:
                    a += 1
                elif indices[a] > indices[b]:
                    b += 1
                else:
                    links += 1
                    a += 1
                    b += 1
        out[u] = links // 2
    return out
