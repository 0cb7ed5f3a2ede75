"""Offline temporal evaluation and balanced-interleaving comparison.

Offline: recommendations are generated on the older snapshot and judged
against the follows each user added by the newer one. Online: two rankings
are merged with balanced interleaving and clicks are credited back to the
ranking that placed them higher.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Hashable, Iterable, Mapping, Sequence

import numpy as np

from .graph import DirectedGraph, diff_edges
from .ranking import RankedList
from .tdist import paired_t

log = logging.getLogger(__name__)

SIGNIFICANCE_LEVEL = 0.01
REPORT_KS = (1, 5, 10)
CURVE_KS = tuple(range(1, 101))


# --- snapshots --------------------------------------------------------------

@dataclass(frozen=True)
class SnapshotPair:
    """Training graph (t1), truth graph (t2) and per-target new follows.

    ``relevance`` maps a train-graph node id to the external keys it started
    following; those keys need not exist in the training graph.
    """

    train: DirectedGraph
    truth: DirectedGraph
    relevance: dict[int, frozenset[str]]

    @property
    def eval_targets(self) -> list[int]:
        return sorted(self.relevance)


def build_snapshot_pair(train: DirectedGraph, truth: DirectedGraph) -> SnapshotPair:
    """Targets are users visited in both snapshots who gained at least one follow."""
    added = diff_edges(train, truth)
    relevance = {}
    for key, new in added.items():
        u, u2 = train.index[key], truth.index[key]
        if train.visited[u] and truth.visited[u2]:
            relevance[u] = frozenset(new)
    if not relevance:
        log.warning("snapshots show no new follows among visited users; nothing to evaluate")
    return SnapshotPair(train, truth, dict(sorted(relevance.items())))


# --- per-list metrics -------------------------------------------------------

def _items(recs) -> list:
    return recs.items if isinstance(recs, RankedList) else list(recs)


def average_precision(recs, relevant: set) -> float:
    if not relevant:
        raise ValueError("average precision needs a non-empty relevant set")
    hits = 0
    total = 0.0
    for i, item in enumerate(_items(recs), start=1):
        if item in relevant:
            hits += 1
            total += hits / i
    return total / len(relevant)


def precision_at(recs, relevant: set, k: int) -> float:
    """Relevant items in the top k divided by k, also for lists shorter than k."""
    if k < 1:
        raise ValueError("k must be >= 1")
    return sum(1 for x in _items(recs)[:k] if x in relevant) / k


def success_at(recs, relevant: set, k: int) -> int:
    if k < 1:
        raise ValueError("k must be >= 1")
    return int(any(x in relevant for x in _items(recs)[:k]))


@dataclass
class MetricSet:
    average_precision: float
    success_at: dict[int, int]
    precision_at: dict[int, float]

    @classmethod
    def of(cls, recs, relevant: set, ks: Iterable[int] = REPORT_KS,
           curve_ks: Iterable[int] = CURVE_KS) -> "MetricSet":
        items = _items(recs)
        return cls(
            average_precision(items, relevant),
            {k: success_at(items, relevant, k) for k in ks},
            {k: precision_at(items, relevant, k) for k in sorted(set(ks) | set(curve_ks))},
        )


# --- significance -----------------------------------------------------------

@dataclass(frozen=True)
class SignificanceMark:
    system_a: str
    system_b: str
    metric: str
    t_statistic: float
    p_value: float
    mark: str
    degenerate: bool = False

    @property
    def symbol(self) -> str:
        return {"improvement": "▲", "deterioration": "▼"}.get(self.mark, "○")


def paired_t_test(a: Sequence[float], b: Sequence[float], system_a: str = "A", system_b: str = "B",
                  metric: str = "", alpha: float = SIGNIFICANCE_LEVEL) -> SignificanceMark:
    """Is ``a`` significantly better (improvement) or worse than ``b``?"""
    res = paired_t(a, b)
    mark = "none"
    if res.p_value < alpha:
        direction = res.mean_difference if res.degenerate else res.t_statistic
        mark = "improvement" if direction > 0 else "deterioration"
    return SignificanceMark(system_a, system_b, metric, res.t_statistic, res.p_value, mark, res.degenerate)


# --- balanced interleaving --------------------------------------------------

@dataclass(frozen=True)
class InterleavedList:
    items: tuple
    origin: tuple[str, ...]
    first_picker: str
    pointers: tuple[tuple[int, int], ...] = field(default=(), repr=False)


def balanced_interleave(a: Sequence[Hashable], b: Sequence[Hashable], rng=None,
                        display_size: int = 10, first_picker: str | None = None) -> InterleavedList:
    """Merge two rankings so that each prefix draws evenly from both.

    The list whose pointer is behind contributes its next unseen item; the
    coin winner goes first on ties. Output length is capped at
    ``min(2 * min(len(a), len(b)), display_size)`` unless one input is
    empty, in which case the other is shown up to ``display_size``.
    """
    a, b = _items(a), _items(b)
    if len(set(a)) != len(a) or len(set(b)) != len(b):
        raise ValueError("input rankings must be duplicate-free")
    if first_picker is None:
        r = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
        first_picker = "A" if r.random() < 0.5 else "B"
    if first_picker not in ("A", "B"):
        raise ValueError("first_picker must be 'A' or 'B'")
    shortest = min(len(a), len(b))
    target = min(2 * shortest if shortest else max(len(a), len(b)), display_size)
    out: list = []
    seen: set = set()
    pointers = []
    ka = kb = 0
    while len(out) < target and (ka < len(a) or kb < len(b)):
        a_turn = ka < kb or (ka == kb and first_picker == "A")
        if (a_turn and ka < len(a)) or kb >= len(b):
            item = a[ka]
            ka += 1
        else:
            item = b[kb]
            kb += 1
        if item not in seen:
            seen.add(item)
            out.append(item)
            pointers.append((ka, kb))
    sa, sb = set(a), set(b)
    origin = tuple("both" if x in sa and x in sb else ("A" if x in sa else "B") for x in out)
    return InterleavedList(tuple(out), origin, first_picker, tuple(pointers))


@dataclass(frozen=True)
class Attribution:
    verdict: str
    lowest_click_rank: int
    k: int
    credit_a: int
    credit_b: int

    def trace(self) -> dict:
        return {"verdict": self.verdict, "lowest_click_rank": self.lowest_click_rank,
                "k": self.k, "credit_a": self.credit_a, "credit_b": self.credit_b}


def attribute_clicks(il: InterleavedList, a: Sequence, b: Sequence, clicks: Iterable) -> Attribution:
    """Credit clicks to the ranking that placed them within the shared top k.

    ``k`` is the smaller of the two ranks (in A and in B) of the lowest
    clicked item; each side earns one point per click inside its own top k.
    """
    a, b = _items(a), _items(b)
    clicks = set(clicks)
    unknown = clicks - set(il.items)
    if unknown:
        raise ValueError(f"clicks on items not shown: {sorted(map(str, unknown))}")
    if not clicks:
        return Attribution("tie", 0, 0, 0, 0)
    lowest = max(i for i, x in enumerate(il.items, start=1) if x in clicks)
    item = il.items[lowest - 1]
    rank_a = a.index(item) + 1 if item in a else math.inf
    rank_b = b.index(item) + 1 if item in b else math.inf
    k = int(min(rank_a, rank_b))
    credit_a = len(clicks & set(a[:k]))
    credit_b = len(clicks & set(b[:k]))
    verdict = "A_wins" if credit_a > credit_b else "B_wins" if credit_b > credit_a else "tie"
    return Attribution(verdict, lowest, k, credit_a, credit_b)


# --- experiment runner ------------------------------------------------------

Recommender = Callable[[int], RankedList]


@dataclass
class EvalReport:
    systems: list[str]
    targets: list[int]
    target_keys: list[str]
    per_target: dict[str, list[MetricSet]]
    significance: list[SignificanceMark]
    failures: dict[str, list[str]]
    ks: tuple[int, ...] = REPORT_KS
    k: int = 100

    def column(self, system: str, metric: str) -> list[float]:
        rows = self.per_target[system]
        if metric == "MAP":
            return [m.average_precision for m in rows]
        kind, k = metric.split("@")
        key = int(k)
        return [float(m.success_at[key] if kind == "s" else m.precision_at[key]) for m in rows]

    @property
    def metrics(self) -> list[str]:
        return ["MAP"] + [f"s@{k}" for k in self.ks]

    def aggregate(self, system: str, metric: str) -> float:
        col = self.column(system, metric)
        return math.fsum(col) / len(col) if col else 0.0

    def mark(self, system: str, metric: str) -> SignificanceMark | None:
        for s in self.significance:
            if s.system_a == system and s.metric == metric:
                return s
        return None

    def curve(self) -> list[tuple[int, str, float]]:
        return [(k, s, self.aggregate(s, f"p@{k}")) for s in self.systems for k in CURVE_KS]

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "n_targets": len(self.targets),
            "systems": {
                s: {m: self.aggregate(s, m) for m in self.metrics + [f"p@{k}" for k in self.ks]}
                for s in self.systems
            },
            "significance": [
                {"system": m.system_a, "baseline": m.system_b, "metric": m.metric,
                 "t": m.t_statistic, "p": m.p_value, "mark": m.mark, "degenerate": m.degenerate}
                for m in self.significance
            ],
            "per_target": {
                s: [
                    {"target": key, "ap": m.average_precision,
                     "s": {str(k): m.success_at[k] for k in self.ks},
                     "p": {str(k): m.precision_at[k] for k in self.ks}}
                    for key, m in zip(self.target_keys, self.per_target[s])
                ]
                for s in self.systems
            },
            "failures": self.failures,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def to_table(self) -> str:
        head = ["ID", "System"] + self.metrics
        rows = []
        for i, s in enumerate(self.systems, start=1):
            row = [f"R{i}", s]
            for m in self.metrics:
                cell = f"{self.aggregate(s, m):.3f}"
                mk = self.mark(s, m)
                if mk is not None:
                    cell += f" {mk.symbol}"
                row.append(cell)
            rows.append(row)
        widths = [max(len(r[i]) for r in [head] + rows) for i in range(len(head))]
        lines = ["  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in [head] + rows]
        note = f"n_targets={len(self.targets)}"
        if len(self.systems) > 1:
            note += f"; each row tested against the row above (paired t-test, p<{SIGNIFICANCE_LEVEL})"
        return "\n".join(lines) + "\n" + note + "\n"

    def curve_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k", "system", "precision"])
        for k, s, v in self.curve():
            w.writerow([k, s, repr(v)])
        return buf.getvalue()


def run_experiment(pair: SnapshotPair, systems: Mapping[str, Recommender], k: int = 100,
                   ks_report: Sequence[int] = REPORT_KS) -> EvalReport:
    """Score every system on every eval target; test each row against the previous one."""
    if not systems:
        raise ValueError("need at least one system")
    keys = pair.train.keys
    targets = pair.eval_targets
    per_target: dict[str, list[MetricSet]] = {}
    failures: dict[str, list[str]] = {}
    for name, rec in systems.items():
        rows = []
        for t in targets:
            relevant = pair.relevance[t]
            try:
                rl = rec(t)
                items = [keys[c] for c in rl.items[:k]]
                if rl.flags.get("empty_profile"):
                    failures.setdefault(name, []).append(keys[t])
            except Exception as exc:  # noqa: BLE001
                log.warning("%s failed on %s: %s", name, keys[t], exc)
                failures.setdefault(name, []).append(keys[t])
                items = []
            rows.append(MetricSet.of(items, relevant, ks_report))
        per_target[name] = rows
    report = EvalReport(list(systems), targets, [keys[t] for t in targets], per_target, [], failures,
                        tuple(ks_report), k)
    names = list(systems)
    if len(targets) >= 2:
        for prev, cur in zip(names, names[1:]):
            for metric in report.metrics:
                report.significance.append(
                    paired_t_test(report.column(cur, metric), report.column(prev, metric), cur, prev, metric)
                )
    return report


def evaluate_runs(pair: SnapshotPair, runs: Mapping[str, Sequence[dict]], k: int = 100,
                  ks_report: Sequence[int] = REPORT_KS) -> EvalReport:
    """Like :func:`run_experiment` but from precomputed JSON-lines records (keys, not ids).

    Every run must cover exactly the evaluation targets.
    """
    keys = pair.train.keys
    wanted = [keys[t] for t in pair.eval_targets]
    lookup: dict[str, dict[str, list[str]]] = {}
    for name, records in runs.items():
        by_target = {r["target"]: [e[0] for e in r["entries"]] for r in records}
        got = sorted(by_target)
        if got != sorted(wanted):
            missing = sorted(set(wanted) - set(got))
            extra = sorted(set(got) - set(wanted))
            first = ("missing " + missing[0]) if missing else ("unexpected " + extra[0])
            raise MismatchedTargetsError(f"run {name!r} does not match the evaluation targets: {first}")
        lookup[name] = by_target

    def replay(name):
        def rec(t):
            items = [pair.train.index[x] for x in lookup[name][keys[t]] if x in pair.train.index]
            return RankedList(t, tuple((c, 0.0) for c in items), k, name)
        return rec

    return run_experiment(pair, {n: replay(n) for n in runs}, k, ks_report)


class MismatchedTargetsError(ValueError):
    pass


def hypergeometric_success(pool: int, relevant: int, k: int) -> float:
    """P(at least one of ``relevant`` items among ``k`` drawn without replacement from ``pool``)."""
    k = min(k, pool)
    if relevant <= 0:
        return 0.0
    if pool - relevant < k:
        return 1.0
    return 1.0 - math.exp(
        math.lgamma(pool - relevant + 1) - math.lgamma(pool - relevant - k + 1)
        - math.lgamma(pool + 1) + math.lgamma(pool - k + 1)
    )
