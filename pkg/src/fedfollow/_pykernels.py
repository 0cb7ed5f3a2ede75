"""Pure-Python/numpy versions of the inner loops in ``_ckernels.pyx``.

Walk and BM25 kernels return bit-identical results to the compiled ones.
The PageRank iteration is vectorised with ``np.bincount`` here, so its
summation order differs and results agree to rounding only.
"""

from __future__ import annotations

import numpy as np

BACKEND = "python"


def mhrw_walk(indptr, indices, start, pick, accept):
    indptr = indptr.tolist()
    indices = indices.tolist()
    out = [int(start)]
    cur = int(start)
    accepted = 0
    for p, a in zip(pick.tolist(), accept.tolist()):
        lo = indptr[cur]
        du = indptr[cur + 1] - lo
        if du > 0:
            j = min(int(p * du), du - 1)
            cand = indices[lo + j]
            dv = indptr[cand + 1] - indptr[cand]
            if a * dv < du:
                cur = cand
                accepted += 1
        out.append(cur)
    return np.asarray(out, dtype=np.int64), accepted


def ego_walk(indptr, indices, seed, gamma, move, pick):
    indptr = indptr.tolist()
    indices = indices.tolist()
    seed = int(seed)
    cur = seed
    out = [cur]
    for m, p in zip(move.tolist(), pick.tolist()):
        lo = indptr[cur]
        d = indptr[cur + 1] - lo
        if m < gamma and d > 0:
            cur = indices[lo + min(int(p * d), d - 1)]
        else:
            cur = seed
        out.append(cur)
    return np.asarray(out, dtype=np.int64)


def ppr_power(indptr, indices, seed, damping, tol, max_iter):
    n = len(indptr) - 1
    deg = np.diff(indptr)
    dangling = deg == 0
    src = np.repeat(np.arange(n), deg)
    safe_deg = np.where(dangling, 1, deg)
    r = np.zeros(n)
    r[seed] = 1.0
    mass_err = 0.0
    converged = False
    it = 0
    while it < max_iter:
        it += 1
        share = damping * r / safe_deg
        nxt = np.bincount(indices, weights=share[src], minlength=n)
        nxt[seed] += damping * r[dangling].sum() + (1.0 - damping)
        mass_err = max(mass_err, abs(nxt.sum() - 1.0))
        diff = np.abs(nxt - r).sum()
        r = nxt
        if diff < tol:
            converged = True
            break
    return r, it, converged, mass_err


def bm25_accumulate(term_indptr, post_docs, post_tf, query_terms, idf, norm, k1, n_docs):
    scores = np.zeros(n_docs)
    for t in query_terms.tolist():
        lo, hi = term_indptr[t], term_indptr[t + 1]
        if lo == hi:
            continue
        docs = post_docs[lo:hi]
        tf = post_tf[lo:hi]
        scores[docs] += idf[t] * (tf * (k1 + 1.0) / (tf + norm[docs]))
    return scores


def triangle_counts(indptr, indices):
    n = len(indptr) - 1
    nbrs = [set(indices[indptr[u]:indptr[u + 1]].tolist()) for u in range(n)]
    out = np.zeros(n, dtype=np.int64)
    for u in range(n):
        links = 0
        for v in nbrs[u]:
            links += len(nbrs[u] & nbrs[v])
        out[u] = links // 2
    return out
