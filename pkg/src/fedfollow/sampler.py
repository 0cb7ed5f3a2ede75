"""Metropolis-Hastings random walk sampling and the egocentric restart walk.

Both walks treat every follow edge as undirected. A walk of ``iterations``
entries starts with the start node and then makes ``iterations - 1``
transitions; rejected proposals and teleports repeat a node.

Randomness is drawn up front as two uniform arrays from
``numpy.random.default_rng(rng_seed)``, so the in-memory walks (compiled or
pure Python) and the fetcher-driven walks replay the same sequence.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import kernels
from .federation import FederationClient, UserRecord
from .graph import DirectedGraph, edge_list_text, load_edge_list

log = logging.getLogger(__name__)


class WalkStuckError(RuntimeError):
    """The walk is at a node without undirected neighbours."""


class UnfetchableStartError(RuntimeError):
    pass


@dataclass(frozen=True)
class WalkConfig:
    iterations: int
    rng_seed: int = 0
    restart_probability: float = 0.2
    burn_in: float = 0.1

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if not 0.0 < self.restart_probability <= 1.0:
            raise ValueError("restart_probability must be in (0, 1]")
        if not 0.0 <= self.burn_in < 1.0:
            raise ValueError("burn_in must be in [0, 1)")

    @property
    def gamma(self) -> float:
        return 1.0 - self.restart_probability

    def draws(self) -> tuple[np.ndarray, np.ndarray]:
        rng = np.random.default_rng(self.rng_seed)
        steps = self.iterations - 1
        return rng.random(steps), rng.random(steps)


# --- single step ------------------------------------------------------------

def mhrw_step(current: int, g: DirectedGraph | Callable[[int], Sequence[int]], rng: np.random.Generator) -> int:
    """One proposal: uniform undirected neighbour, accepted w.p. min(1, deg(cur)/deg(cand))."""
    nbrs = g.neighbors if isinstance(g, DirectedGraph) else g
    here = nbrs(current)
    du = len(here)
    if du == 0:
        raise WalkStuckError(f"node {current} has no neighbours")
    cand = int(here[min(int(rng.random() * du), du - 1)])
    dv = len(nbrs(cand))
    if rng.random() * dv < du:
        return cand
    return current


def acceptance_probability(deg_current: int, deg_candidate: int) -> float:
    return min(1.0, deg_current / deg_candidate)


# --- in-memory walks (kernel backed) ---------------------------------------

def mhrw_walk_graph(g: DirectedGraph, start: int, config: WalkConfig) -> np.ndarray:
    """Visited sequence of an MHRW over a fully known graph."""
    indptr, indices = g.undirected
    if indptr[start + 1] == indptr[start]:
        raise WalkStuckError(f"start node {start} has no neighbours")
    pick, accept = config.draws()
    order, _ = kernels.mhrw_walk(indptr, indices, int(start), pick, accept)
    return order


def ego_walk_graph(g: DirectedGraph, seed: int, config: WalkConfig) -> np.ndarray:
    indptr, indices = g.undirected
    move, pick = config.draws()
    return kernels.ego_walk(indptr, indices, int(seed), config.gamma, move, pick)


def visit_counts(order: Sequence[int], n: int, burn_in: float = 0.1, thin: int = 1) -> np.ndarray:
    """Per-node visit counts after dropping the burn-in prefix and thinning."""
    order = np.asarray(order, dtype=np.int64)
    kept = order[int(len(order) * burn_in)::thin]
    return np.bincount(kept, minlength=n)


# --- fetcher-driven walks ---------------------------------------------------

@dataclass
class SampleResult:
    """Outcome of a crawl walk.

    ``visited_order`` and ``unique_visited`` index into ``subgraph``.
    ``fetched`` lists every key requested from the client in order,
    including MHRW proposals that were rejected (their degree is needed for
    the acceptance test).
    """

    visited_order: list[int]
    subgraph: DirectedGraph
    fetched: list[str]
    failures: list[tuple[str, str]]
    config: WalkConfig
    kind: str = "mhrw"
    start: str = ""
    accepted: int = 0
    counters: dict = field(default_factory=dict)

    @property
    def unique_visited(self) -> set[int]:
        return set(self.visited_order)

    @property
    def visited_keys(self) -> list[str]:
        return [self.subgraph.keys[u] for u in self.visited_order]

    def manifest(self) -> dict:
        g = self.subgraph
        return {
            "kind": self.kind,
            "start": self.start,
            "config": asdict(self.config),
            "iterations": len(self.visited_order),
            "accepted": self.accepted,
            "visited_order": self.visited_keys,
            "unique_visited": sorted(g.keys[u] for u in self.unique_visited),
            "known_adjacency": [k for k, v in zip(g.keys, g.visited.tolist()) if v],
            "fetched": list(self.fetched),
            "failures": [list(f) for f in self.failures],
            "node_count": g.node_count,
            "edge_count": g.edge_count,
            "counters": dict(self.counters),
        }

    def edge_list(self) -> str:
        return edge_list_text(self.subgraph)

    def manifest_json(self) -> str:
        return json.dumps(self.manifest(), sort_keys=True, indent=2) + "\n"

    @staticmethod
    def load_graph(edge_text: str, manifest: dict) -> DirectedGraph:
        return load_edge_list(edge_text, visited=manifest["known_adjacency"])


class _Walker:
    def __init__(self, client: FederationClient):
        self.client = client
        self.records: dict[str, UserRecord] = {}
        self.failures: list[tuple[str, str]] = []
        self._nbrs: dict[str, list[str]] = {}

    def get(self, key: str) -> UserRecord:
        rec = self.records.get(key)
        if rec is None:
            rec = self.records[key] = self.client.fetch_user(key)
            if not rec.ok:
                self.failures.append((key, rec.status))
        return rec

    def neighbors(self, key: str) -> list[str]:
        nb = self._nbrs.get(key)
        if nb is None:
            nb = self._nbrs[key] = self.get(key).neighbors()
        return nb

    def subgraph(self) -> DirectedGraph:
        """Graph over fetched users and their neighbours, in discovery order."""
        index: dict[str, int] = {}
        keys: list[str] = []

        def intern(k: str) -> int:
            if k not in index:
                index[k] = len(keys)
                keys.append(k)
            return index[k]

        edges = []
        for key, rec in self.records.items():
            if not rec.ok:
                continue
            u = intern(key)
            for f in rec.following:
                edges.append((u, intern(f)))
            for f in rec.followers:
                edges.append((intern(f), u))
        visited = [k in self.records and self.records[k].ok for k in keys]
        return DirectedGraph.from_edges(keys, edges, visited)


def _counters(client: FederationClient) -> dict:
    c = client.counters
    return {"cache_hits": c.cache_hits, "fetches": c.fetches, "blocked": c.blocked,
            "down": c.down, "gone": c.gone, "retries": c.retries}


def mhrw_sample(start: str, config: WalkConfig, client: FederationClient) -> SampleResult:
    """MHRW crawl from ``start``, fetching each user's lists on first contact.

    A proposal whose fetch fails is rejected, so the walk stays put.
    """
    walker = _Walker(client)
    first = walker.get(start)
    if not first.ok:
        raise UnfetchableStartError(f"cannot fetch start {start}: {first.status}")
    if not walker.neighbors(start):
        raise WalkStuckError(f"start {start} has no neighbours")
    pick, accept = config.draws()
    cur = start
    order = [cur]
    accepted = 0
    for p, a in zip(pick.tolist(), accept.tolist()):
        here = walker.neighbors(cur)
        du = len(here)
        cand = here[min(int(p * du), du - 1)]
        if walker.get(cand).ok:
            dv = len(walker.neighbors(cand))
            if dv > 0 and a * dv < du:
                cur = cand
                accepted += 1
        order.append(cur)
    g = walker.subgraph()
    return SampleResult(
        visited_order=[g.index[k] for k in order],
        subgraph=g,
        fetched=list(walker.records),
        failures=walker.failures,
        config=config,
        kind="mhrw",
        start=start,
        accepted=accepted,
        counters=_counters(client),
    )


def ego_walk(seed: str, config: WalkConfig, client: FederationClient) -> SampleResult:
    """Restart walk around ``seed``: move to a uniform neighbour w.p. gamma, else jump home.

    The vicinity command defaults to 200 iterations and gamma = 0.8. A failed move keeps
    the walk where it is.
    """
    walker = _Walker(client)
    first = walker.get(seed)
    if not first.ok:
        raise UnfetchableStartError(f"cannot fetch seed {seed}: {first.status}")
    if not walker.neighbors(seed):
        log.warning("seed %s has no neighbours; vicinity is the seed alone", seed)
    move, pick = config.draws()
    gamma = config.gamma
    cur = seed
    order = [cur]
    for m, p in zip(move.tolist(), pick.tolist()):
        here = walker.neighbors(cur)
        if m < gamma and here:
            nxt = here[min(int(p * len(here)), len(here) - 1)]
            if walker.get(nxt).ok:
                cur = nxt
        else:
            cur = seed
        order.append(cur)
    g = walker.subgraph()
    return SampleResult(
        visited_order=[g.index[k] for k in order],
        subgraph=g,
        fetched=list(walker.records),
        failures=walker.failures,
        config=config,
        kind="ego",
        start=seed,
        counters=_counters(client),
    )
