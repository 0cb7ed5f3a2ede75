"""Synthetic two-snapshot follow graphs for desk-scale experiments.

``planted-community``: users belong to hidden communities and carry a
popularity weight; follows go to a community member with probability
``p_in`` (else anywhere), picked in proportion to popularity.
``preferential-attachment``: follow targets are picked in proportion to
in-degree + 1. In both models the t2 snapshot adds new follows for a random
subset of users using the same rule, and never removes edges.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from ._util import derive_seed
from .graph import DirectedGraph

MODELS = ("planted-community", "preferential-attachment")


@dataclass(frozen=True)
class SynthConfig:
    n: int = 1000
    model: str = "planted-community"
    seed: int = 0
    communities: int = 10
    instances: int = 20
    mean_out_degree: float = 10.0
    p_in: float = 0.85
    popularity_sigma: float = 1.0
    changed_users: int = 100
    mean_new_follows: float = 6.0

    def __post_init__(self):
        if self.model not in MODELS:
            raise ValueError(f"unknown model {self.model!r}; expected one of {MODELS}")
        if self.n < 10:
            raise ValueError("n must be >= 10")
        if not 0 <= self.changed_users <= self.n:
            raise ValueError("changed_users must be within [0, n]")
        if self.communities < 1 or self.instances < 1:
            raise ValueError("communities and instances must be >= 1")


@dataclass
class SynthWorld:
    t1: DirectedGraph
    t2: DirectedGraph
    config: SynthConfig
    community: np.ndarray
    changed: list[int]
    new_follows: dict[int, list[int]]

    def manifest(self) -> dict:
        counts = [len(v) for v in self.new_follows.values()]
        return {
            "config": asdict(self.config),
            "t1_edges": self.t1.edge_count,
            "t2_edges": self.t2.edge_count,
            "nodes": self.t1.node_count,
            "changed_users": [self.t1.keys[u] for u in self.changed],
            "mean_new_follows": float(np.mean(counts)) if counts else 0.0,
            "community_sizes": np.bincount(self.community, minlength=self.config.communities).tolist(),
        }


def _keys(cfg: SynthConfig) -> list[str]:
    width = len(str(cfg.n - 1))
    return [f"u{i:0{width}d}@inst{i % cfg.instances:02d}.example" for i in range(cfg.n)]


def _draw_count(rng: np.random.Generator, mean: float) -> int:
    return 1 + int(rng.poisson(max(mean - 1.0, 0.0)))


class _Picker:
    def __init__(self, cfg: SynthConfig, rng: np.random.Generator):
        self.cfg = cfg
        self.rng = rng
        n = cfg.n
        self.community = rng.integers(0, cfg.communities, size=n)
        self.popularity = rng.lognormal(0.0, cfg.popularity_sigma, size=n)
        self.members = [np.flatnonzero(self.community == c) for c in range(cfg.communities)]
        self.indeg = np.zeros(n)

    def pick(self, u: int, taken: set[int]) -> int | None:
        rng, cfg = self.rng, self.cfg
        if cfg.model == "planted-community":
            pool = self.members[self.community[u]] if rng.random() < cfg.p_in else np.arange(cfg.n)
            w = self.popularity[pool]
        else:
            pool = np.arange(cfg.n)
            w = self.indeg + 1.0
        mask = np.ones(len(pool), dtype=bool)
        mask[np.isin(pool, list(taken | {u}))] = False
        if not mask.any():
            return None
        pool, w = pool[mask], w[mask]
        v = int(pool[rng.choice(len(pool), p=w / w.sum())])
        self.indeg[v] += 1
        return v


def generate(cfg: SynthConfig) -> SynthWorld:
    keys = _keys(cfg)
    picker = _Picker(cfg, np.random.default_rng(derive_seed(cfg.seed, "synth", "structure")))
    rng = np.random.default_rng(derive_seed(cfg.seed, "synth", "t1"))
    picker.rng = rng
    out: list[set[int]] = [set() for _ in range(cfg.n)]
    for u in rng.permutation(cfg.n).tolist():
        for _ in range(_draw_count(rng, cfg.mean_out_degree)):
            v = picker.pick(u, out[u])
            if v is not None:
                out[u].add(v)
    t1_edges = [(u, v) for u in range(cfg.n) for v in sorted(out[u])]

    rng = np.random.default_rng(derive_seed(cfg.seed, "synth", "t2"))
    picker.rng = rng
    changed = sorted(rng.choice(cfg.n, size=cfg.changed_users, replace=False).tolist())
    new_follows: dict[int, list[int]] = {}
    for u in changed:
        added = []
        for _ in range(_draw_count(rng, cfg.mean_new_follows)):
            v = picker.pick(u, out[u])
            if v is not None:
                out[u].add(v)
                added.append(v)
        new_follows[u] = added
    t2_edges = [(u, v) for u in range(cfg.n) for v in sorted(out[u])]
    return SynthWorld(
        DirectedGraph.from_edges(keys, t1_edges),
        DirectedGraph.from_edges(keys, t2_edges),
        cfg,
        picker.community,
        changed,
        new_follows,
    )
