"""Ranked recommendation lists shared by every recommender."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

TIE_DECIMALS = 10


@dataclass(frozen=True)
class RankedList:
    """Top-k candidates for one target, best first.

    Scores never increase down the list and ties are ordered by ascending
    node id. ``flags`` carries diagnostics such as ``empty_profile`` or
    ``not_converged``.
    """

    target: int
    entries: tuple[tuple[int, float], ...]
    k: int
    system: str = ""
    flags: dict = field(default_factory=dict)

    @property
    def items(self) -> list[int]:
        return [c for c, _ in self.entries]

    def __len__(self) -> int:
        return len(self.entries)

    def to_record(self, keys: tuple[str, ...] | None = None, **extra) -> dict:
        name = (lambda u: keys[u]) if keys is not None else (lambda u: u)
        rec = {
            "target": name(self.target),
            "system": self.system,
            "k": self.k,
            "entries": [[name(c), s] for c, s in self.entries],
            "flags": dict(self.flags),
        }
        rec.update(extra)
        return rec


def top_k(
    candidates: Iterable[int] | np.ndarray,
    scores: Iterable[float] | np.ndarray,
    k: int,
    exclude: set[int] = frozenset(),
    positive_only: bool = True,
) -> tuple[tuple[int, float], ...]:
    """Select the k best ``(candidate, score)`` pairs with the ascending-id tie rule."""
    cand = np.asarray(candidates, dtype=np.int64)
    sc = np.asarray(scores, dtype=np.float64)
    keep = np.ones(len(cand), dtype=bool)
    if positive_only:
        keep &= sc > 0
    if exclude:
        keep &= ~np.isin(cand, np.fromiter(exclude, dtype=np.int64, count=len(exclude)))
    cand, sc = cand[keep], sc[keep]
    # scores equal up to summation-order rounding count as ties
    order = np.lexsort((cand, -np.round(sc, TIE_DECIMALS)))[:k]
    return tuple((int(cand[i]), float(sc[i])) for i in order)


def write_jsonl(lists: Iterable[RankedList], keys=None, **extra) -> str:
    return "".join(
        json.dumps(rl.to_record(keys, **extra), sort_keys=True) + "\n" for rl in lists
    )


def read_jsonl(text: str) -> list[dict]:
    return [json.loads(line) for line in text.splitlines() if line.strip()]
