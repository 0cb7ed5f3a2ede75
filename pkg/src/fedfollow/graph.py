"""Directed follow graph with dense integer ids and summary statistics.

Edge ``(u, v)`` means *u follows v*. Nodes are addressed by a dense id in
``[0, node_count)``; the id <-> external key map (``"user@instance"``) is a
bijection fixed at load time.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Iterator, TextIO

import numpy as np

from . import kernels


class GraphParseError(ValueError):
    def __init__(self, lineno: int, line: str, reason: str):
        self.lineno = lineno
        self.line = line
        super().__init__(f"line {lineno}: {reason}: {line!r}")


class EmptyGraphError(ValueError):
    pass


def _csr(n: int, src: np.ndarray, dst: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    order = np.lexsort((dst, src))
    src, dst = src[order], dst[order]
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(src, minlength=n), out=indptr[1:])
    return indptr, np.ascontiguousarray(dst, dtype=np.int64)


@dataclass(frozen=True, eq=False)
class DirectedGraph:
    """Immutable CSR adjacency in both directions.

    ``visited[u]`` is true when both of u's lists are known (a crawled
    user); neighbours discovered through a visited user carry only the
    edges that touch visited users.
    """

    keys: tuple[str, ...]
    out_indptr: np.ndarray
    out_indices: np.ndarray
    in_indptr: np.ndarray
    in_indices: np.ndarray
    visited: np.ndarray
    self_loops_dropped: int = 0
    index: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "index", {k: i for i, k in enumerate(self.keys)})
        if len(self.index) != len(self.keys):
            raise ValueError("external keys must be unique")

    @classmethod
    def from_edges(
        cls,
        keys: Iterable[str],
        edges: Iterable[tuple[int, int]],
        visited: Iterable[bool] | None = None,
        self_loops_dropped: int = 0,
    ) -> "DirectedGraph":
        """Build from dense-id edges; duplicates collapse, self-loops are dropped."""
        keys = tuple(keys)
        n = len(keys)
        arr = np.asarray(list(edges), dtype=np.int64).reshape(-1, 2)
        if len(arr):
            if arr.min() < 0 or arr.max() >= n:
                raise ValueError("edge endpoint outside [0, node_count)")
            loops = arr[:, 0] == arr[:, 1]
            self_loops_dropped += int(loops.sum())
            arr = np.unique(arr[~loops], axis=0)
        src, dst = arr[:, 0].copy(), arr[:, 1].copy()
        out_indptr, out_indices = _csr(n, src, dst)
        in_indptr, in_indices = _csr(n, dst, src)
        vis = np.ones(n, dtype=bool) if visited is None else np.asarray(list(visited), dtype=bool)
        if vis.shape != (n,):
            raise ValueError("visited mask must have one entry per node")
        return cls(keys, out_indptr, out_indices, in_indptr, in_indices, vis, self_loops_dropped)

    @property
    def node_count(self) -> int:
        return len(self.keys)

    @property
    def edge_count(self) -> int:
        return len(self.out_indices)

    @property
    def visited_count(self) -> int:
        return int(self.visited.sum())

    def id_of(self, key: str) -> int:
        return self.index[key]

    def key_of(self, u: int) -> str:
        return self.keys[u]

    def _check(self, u: int) -> None:
        if not 0 <= u < self.node_count:
            raise IndexError(f"node {u} outside [0, {self.node_count})")

    def out_neighbors(self, u: int) -> np.ndarray:
        self._check(u)
        return self.out_indices[self.out_indptr[u]:self.out_indptr[u + 1]]

    def in_neighbors(self, u: int) -> np.ndarray:
        self._check(u)
        return self.in_indices[self.in_indptr[u]:self.in_indptr[u + 1]]

    def out_degrees(self) -> np.ndarray:
        return np.diff(self.out_indptr)

    def in_degrees(self) -> np.ndarray:
        return np.diff(self.in_indptr)

    @cached_property
    def undirected(self) -> tuple[np.ndarray, np.ndarray]:
        """CSR of the undirected view; a reciprocated pair is one edge."""
        n = self.node_count
        src = np.repeat(np.arange(n, dtype=np.int64), self.out_degrees())
        dst = self.out_indices
        both = np.unique(np.concatenate([np.stack([src, dst], 1), np.stack([dst, src], 1)]), axis=0)
        return _csr(n, both[:, 0].copy(), both[:, 1].copy())

    def neighbors(self, u: int) -> np.ndarray:
        """Sorted undirected neighbours of ``u``."""
        self._check(u)
        indptr, indices = self.undirected
        return indices[indptr[u]:indptr[u + 1]]

    def total_degrees(self) -> np.ndarray:
        return np.diff(self.undirected[0])

    def edges(self) -> Iterator[tuple[int, int]]:
        src = np.repeat(np.arange(self.node_count), self.out_degrees())
        yield from zip(src.tolist(), self.out_indices.tolist())

    def key_edges(self) -> set[tuple[str, str]]:
        return {(self.keys[u], self.keys[v]) for u, v in self.edges()}


def degree(g: DirectedGraph, u: int, mode: str = "total") -> int:
    """In-, out- or undirected total degree of ``u``."""
    if mode == "out":
        return len(g.out_neighbors(u))
    if mode == "in":
        return len(g.in_neighbors(u))
    if mode == "total":
        return len(g.neighbors(u))
    raise ValueError(f"unknown degree mode {mode!r}")


def _lines(source: TextIO | str | Iterable[str]) -> Iterable[str]:
    if isinstance(source, str):
        return io.StringIO(source)
    return source


def load_edge_list(
    source: TextIO | str | Iterable[str],
    visited: Iterable[str] | None = None,
) -> DirectedGraph:
    """Parse ``src<TAB>dst`` lines into a graph.

    Ids are assigned in order of first sight. Lines starting with ``#`` and
    blank lines are skipped. ``visited`` lists the keys whose adjacency is
    complete; when omitted every node counts as visited. Visited keys that
    never occur in an edge become isolated nodes.
    """
    index: dict[str, int] = {}
    keys: list[str] = []
    edges: list[tuple[int, int]] = []
    loops = 0

    def intern(key: str) -> int:
        i = index.get(key)
        if i is None:
            i = index[key] = len(keys)
            keys.append(key)
        return i

    for lineno, raw in enumerate(_lines(source), start=1):
        line = raw.rstrip("\r\n")
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2 or not parts[0] or not parts[1]:
            raise GraphParseError(lineno, line, f"expected 2 tab-separated fields, got {len(parts)}")
        if parts[0] == parts[1]:
            loops += 1
            continue
        edges.append((intern(parts[0]), intern(parts[1])))

    if visited is None:
        mask = None
    else:
        wanted = set(visited)
        for key in sorted(wanted - index.keys()):
            intern(key)
        mask = [k in wanted for k in keys]
    return DirectedGraph.from_edges(keys, edges, mask, self_loops_dropped=loops)


def dump_edge_list(g: DirectedGraph, stream: TextIO) -> None:
    """Write edges sorted by (source key, target key) so the text is canonical."""
    for a, b in sorted(g.key_edges()):
        stream.write(f"{a}\t{b}\n")


def edge_list_text(g: DirectedGraph) -> str:
    buf = io.StringIO()
    dump_edge_list(g, buf)
    return buf.getvalue()


def diff_edges(older: DirectedGraph, newer: DirectedGraph) -> dict[str, set[str]]:
    """New follows per user between two snapshots, keyed by external key.

    Only users present in both graphs are reported; removed edges are ignored.
    """
    added: dict[str, set[str]] = {}
    for key, u_new in newer.index.items():
        u_old = older.index.get(key)
        if u_old is None:
            continue
        before = {older.keys[v] for v in older.out_neighbors(u_old).tolist()}
        after = {newer.keys[v] for v in newer.out_neighbors(u_new).tolist()}
        new = after - before
        if new:
            added[key] = new
    return added


# --- statistics -------------------------------------------------------------

ASSORTATIVITY_VARIANTS = ("out-in", "out-out", "in-in", "in-out", "undirected")


@dataclass(frozen=True)
class GraphStats:
    node_count: int
    visited_count: int
    edge_count: int
    assortativity: float
    avg_degree: float
    ncc: float
    scc_fraction: float
    assortativity_variant: str = "out-in"
    assortativity_degenerate: bool = False
    assortativity_all: dict = field(default_factory=dict)

    @property
    def avg_total_degree(self) -> float:
        """Both endpoints counted: 2|E|/|V|, shown as "Deg." in the table."""
        return 2.0 * self.avg_degree

    def as_dict(self) -> dict:
        out = {
            "V": self.node_count,
            "V_visited": self.visited_count,
            "E": self.edge_count,
            "assortativity": self.assortativity,
            "assortativity_variant": self.assortativity_variant,
            "assortativity_degenerate": self.assortativity_degenerate,
            "avg_degree": self.avg_degree,
            "avg_total_degree": self.avg_total_degree,
            "ncc": self.ncc,
            "scc_fraction": self.scc_fraction,
        }
        for name, value in self.assortativity_all.items():
            out[f"assortativity[{name}]"] = value
        return out

    def to_keyvalue(self) -> str:
        return "".join(f"{k}={_fmt(v)}\n" for k, v in self.as_dict().items())

    def to_table(self, label: str = "graph") -> str:
        head = ("Graph", "|V|", "|V*|", "|E|", "Assort.", "Deg.", "NCC", "SCC")
        row = (
            label,
            f"{self.node_count:,}",
            f"{self.visited_count:,}",
            f"{self.edge_count:,}",
            f"{self.assortativity:.3f}",
            f"{self.avg_total_degree:.2f}",
            f"{self.ncc:.2f}",
            f"{self.scc_fraction:.3f}",
        )
        widths = [max(len(a), len(b)) for a, b in zip(head, row)]
        fmt = "  ".join(f"{{:>{w}}}" for w in widths)
        return fmt.format(*head) + "\n" + fmt.format(*row) + "\n"


def _fmt(v) -> str:
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return repr(v)
    return str(v)


def assortativity(g: DirectedGraph, variant: str = "out-in") -> tuple[float, bool]:
    """Pearson degree correlation over edges; returns ``(value, degenerate)``.

    ``"x-y"`` correlates the x-degree of the source with the y-degree of the
    target over directed edges. ``"undirected"`` uses total degrees over both
    orientations of every undirected edge.
    """
    if variant == "undirected":
        indptr, indices = g.undirected
        deg = np.diff(indptr).astype(float)
        src = np.repeat(np.arange(g.node_count), np.diff(indptr))
        x, y = deg[src], deg[indices]
    else:
        try:
            s_kind, t_kind = variant.split("-")
            pick = {"out": g.out_degrees(), "in": g.in_degrees()}
            s_deg, t_deg = pick[s_kind].astype(float), pick[t_kind].astype(float)
        except (ValueError, KeyError):
            raise ValueError(f"unknown assortativity variant {variant!r}") from None
        src = np.repeat(np.arange(g.node_count), g.out_degrees())
        x, y = s_deg[src], t_deg[g.out_indices]
    if len(x) == 0:
        return 0.0, True
    dx, dy = x - x.mean(), y - y.mean()
    denom = math.sqrt(float((dx * dx).sum()) * float((dy * dy).sum()))
    if denom == 0.0:
        return 0.0, True
    return float((dx * dy).sum()) / denom, False


def local_clustering(g: DirectedGraph) -> np.ndarray:
    """Undirected local clustering coefficient per node (0 below degree 2)."""
    indptr, indices = g.undirected
    tri = kernels.triangle_counts(indptr, indices).astype(float)
    deg = np.diff(indptr).astype(float)
    pairs = deg * (deg - 1.0) / 2.0
    return np.divide(tri, pairs, out=np.zeros_like(tri), where=pairs > 0)


def strongly_connected_components(g: DirectedGraph) -> np.ndarray:
    """Component label per node, via iterative Tarjan (linear time)."""
    n = g.node_count
    indptr = g.out_indptr.tolist()
    indices = g.out_indices.tolist()
    order = [-1] * n
    low = [0] * n
    on_stack = [False] * n
    comp = [-1] * n
    stack: list[int] = []
    counter = 0
    n_comp = 0
    for root in range(n):
        if order[root] != -1:
            continue
        work = [(root, indptr[root])]
        order[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack[root] = True
        while work:
            u, p = work[-1]
            if p < indptr[u + 1]:
                work[-1] = (u, p + 1)
                v = indices[p]
                if order[v] == -1:
                    order[v] = low[v] = counter
                    counter += 1
                    stack.append(v)
                    on_stack[v] = True
                    work.append((v, indptr[v]))
                elif on_stack[v] and order[v] < low[u]:
                    low[u] = order[v]
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                if low[u] < low[parent]:
                    low[parent] = low[u]
            if low[u] == order[u]:
                while True:
                    w = stack.pop()
                    on_stack[w] = False
                    comp[w] = n_comp
                    if w == u:
                        break
                n_comp += 1
    return np.asarray(comp, dtype=np.int64)


def compute_stats(g: DirectedGraph, assortativity_variant: str = "out-in") -> GraphStats:
    if g.node_count == 0:
        raise EmptyGraphError("statistics are undefined for an empty graph")
    all_variants = {v: assortativity(g, v)[0] for v in ASSORTATIVITY_VARIANTS}
    assort, degenerate = assortativity(g, assortativity_variant)
    comp = strongly_connected_components(g)
    largest = int(np.bincount(comp).max())
    return GraphStats(
        node_count=g.node_count,
        visited_count=g.visited_count,
        edge_count=g.edge_count,
        assortativity=assort,
        avg_degree=g.edge_count / g.node_count,
        ncc=float(local_clustering(g).mean()),
        scc_fraction=largest / g.node_count,
        assortativity_variant=assortativity_variant,
        assortativity_degenerate=degenerate,
        assortativity_all=all_variants,
    )
