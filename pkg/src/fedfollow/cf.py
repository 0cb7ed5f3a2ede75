"""Profile-based collaborative filtering with BM25.

Every visited user becomes a document whose terms are user ids: the people
they follow, the people following them, or both. A target's own profile is
the query, and the best-scoring documents are recommended.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from . import kernels
from .graph import DirectedGraph
from .ranking import RankedList, top_k

STRATEGIES = ("following", "followers", "combined")
MAX_QUERY_TOKENS = 10_000


@dataclass(frozen=True)
class UserProfile:
    owner: int
    strategy: str
    tokens: tuple[int, ...]


def profile_tokens(g: DirectedGraph, u: int, strategy: str) -> tuple[int, ...]:
    if strategy == "following":
        toks = set(g.out_neighbors(u).tolist())
    elif strategy == "followers":
        toks = set(g.in_neighbors(u).tolist())
    elif strategy == "combined":
        toks = set(g.out_neighbors(u).tolist()) | set(g.in_neighbors(u).tolist())
    else:
        raise ValueError(f"unknown profile strategy {strategy!r}; expected one of {STRATEGIES}")
    toks.discard(u)
    return tuple(sorted(toks))


def build_profiles(g: DirectedGraph, strategy: str) -> list[UserProfile]:
    """One profile per visited node that has at least one token."""
    out = []
    for u in np.flatnonzero(g.visited).tolist():
        toks = profile_tokens(g, u, strategy)
        if toks:
            out.append(UserProfile(u, strategy, toks))
    return out


def bm25_idf(n_docs: int, df: int) -> float:
    return math.log(1.0 + (n_docs - df + 0.5) / (df + 0.5))


class ProfileIndex:
    """Inverted index over profiles. Terms and document owners are node ids."""

    def __init__(self, profiles: Iterable[UserProfile], n_terms: int, k1: float = 1.2, b: float = 0.75,
                 strategy: str | None = None):
        profiles = list(profiles)
        self.k1 = float(k1)
        self.b = float(b)
        self.strategy = strategy or (profiles[0].strategy if profiles else None)
        self.owners = np.asarray([p.owner for p in profiles], dtype=np.int64)
        self.doc_of = {int(o): i for i, o in enumerate(self.owners.tolist())}
        self._tf = [Counter(p.tokens) for p in profiles]
        self.doc_lengths = np.asarray([len(p.tokens) for p in profiles], dtype=np.float64)
        self.doc_count = len(profiles)
        self.avg_doc_length = float(self.doc_lengths.mean()) if self.doc_count else 0.0

        terms, docs, tfs = [], [], []
        for d, counts in enumerate(self._tf):
            for t, c in counts.items():
                terms.append(t)
                docs.append(d)
                tfs.append(c)
        terms = np.asarray(terms, dtype=np.int64)
        order = np.lexsort((np.asarray(docs, dtype=np.int64), terms))
        self.post_docs = np.ascontiguousarray(np.asarray(docs, dtype=np.int64)[order])
        self.post_tf = np.ascontiguousarray(np.asarray(tfs, dtype=np.float64)[order])
        self.term_indptr = np.zeros(n_terms + 1, dtype=np.int64)
        np.cumsum(np.bincount(terms, minlength=n_terms), out=self.term_indptr[1:])
        self.df = np.diff(self.term_indptr)
        n = self.doc_count
        self.idf = np.asarray([bm25_idf(n, int(df)) if df else 0.0 for df in self.df.tolist()])
        if self.avg_doc_length > 0:
            self.norm = self.k1 * (1.0 - self.b + self.b * self.doc_lengths / self.avg_doc_length)
        else:
            self.norm = np.zeros(n)

    @classmethod
    def build(cls, g: DirectedGraph, strategy: str, k1: float = 1.2, b: float = 0.75) -> "ProfileIndex":
        return cls(build_profiles(g, strategy), g.node_count, k1, b, strategy=strategy)

    def postings(self, term: int) -> list[tuple[int, int]]:
        lo, hi = self.term_indptr[term], self.term_indptr[term + 1]
        return [(int(self.owners[d]), int(tf)) for d, tf in zip(self.post_docs[lo:hi], self.post_tf[lo:hi])]

    def score_all(self, query: Iterable[int]) -> np.ndarray:
        """BM25 score of every document (document order = ``owners``)."""
        q = np.asarray([t for t in query if 0 <= t < len(self.df)], dtype=np.int64)
        return kernels.bm25_accumulate(self.term_indptr, self.post_docs, self.post_tf, q,
                                       self.idf, self.norm, self.k1, self.doc_count)


def bm25_score(index: ProfileIndex, query: Iterable[int], doc: int) -> float:
    """Score of the document owned by node ``doc``; raises KeyError if unindexed."""
    d = index.doc_of[doc]
    tf = index._tf[d]
    norm = index.k1 * (1.0 - index.b + index.b * index.doc_lengths[d] / index.avg_doc_length)
    score = 0.0
    for t in query:
        f = tf.get(t, 0)
        if f == 0:
            continue
        df = int(index.df[t])
        score += bm25_idf(index.doc_count, df) * (f * (index.k1 + 1.0) / (f + norm))
    return score


def _as_rng(rng) -> np.random.Generator:
    return rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)


def followees(g: DirectedGraph, target: int) -> set[int]:
    return set(g.out_neighbors(target).tolist())


def recommend_cf(
    index: ProfileIndex,
    g_train: DirectedGraph,
    target: int,
    k: int = 100,
    rng=None,
    filter_followees: bool = True,
    max_query_tokens: int = MAX_QUERY_TOKENS,
) -> RankedList:
    system = f"cf:{index.strategy}"
    tokens = profile_tokens(g_train, target, index.strategy)
    if not tokens:
        return RankedList(target, (), k, system, {"empty_profile": True})
    flags = {}
    if len(tokens) > max_query_tokens:
        chosen = _as_rng(rng).choice(len(tokens), size=max_query_tokens, replace=False)
        tokens = tuple(tokens[i] for i in np.sort(chosen))
        flags["query_subsampled"] = True
    scores = index.score_all(tokens)
    exclude = {target} | (followees(g_train, target) if filter_followees else set())
    return RankedList(target, top_k(index.owners, scores, k, exclude), k, system, flags)


def recommend_random(g_train: DirectedGraph, target: int, k: int = 100, rng=None,
                     filter_followees: bool = True) -> RankedList:
    """k users drawn uniformly without replacement from the whole graph.

    Scores are ``k, k-1, ...`` so the list satisfies the ranking invariants.
    """
    exclude = {target} | (followees(g_train, target) if filter_followees else set())
    mask = np.ones(g_train.node_count, dtype=bool)
    mask[list(exclude)] = False
    eligible = np.flatnonzero(mask)
    m = min(k, len(eligible))
    picked = _as_rng(rng).choice(eligible, size=m, replace=False) if m else np.empty(0, dtype=np.int64)
    entries = tuple((int(c), float(m - i)) for i, c in enumerate(picked.tolist()))
    return RankedList(target, entries, k, "random")
