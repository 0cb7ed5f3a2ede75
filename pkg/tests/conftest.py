import numpy as np
import pytest

from fedfollow import kernels
from fedfollow.graph import DirectedGraph, load_edge_list


def graph_from(text: str) -> DirectedGraph:
    return load_edge_list(text)


def keyed_graph(n: int, edges, instance_of=lambda i: "x") -> DirectedGraph:
    """Graph with keys u000@x.. whose lexical order matches the dense ids."""
    keys = [f"u{i:03d}@{instance_of(i)}" for i in range(n)]
    return DirectedGraph.from_edges(keys, edges)


def random_digraph(n: int, p: float, rng: np.random.Generator) -> DirectedGraph:
    adj = rng.random((n, n)) < p
    np.fill_diagonal(adj, False)
    edges = list(zip(*np.nonzero(adj)))
    return keyed_graph(n, [(int(u), int(v)) for u, v in edges])


def undirected_connected(g: DirectedGraph) -> bool:
    seen = {0}
    stack = [0]
    while stack:
        u = stack.pop()
        for v in g.neighbors(u).tolist():
            if v not in seen:
                seen.add(v)
                stack.append(v)
    return len(seen) == g.node_count


def has_odd_cycle(g: DirectedGraph) -> bool:
    colour = {0: 0}
    stack = [0]
    while stack:
        u = stack.pop()
        for v in g.neighbors(u).tolist():
            if v not in colour:
                colour[v] = 1 - colour[u]
                stack.append(v)
            elif colour[v] == colour[u]:
                return True
    return False


def connected_nonbipartite(n: int, p: float, seed: int) -> DirectedGraph:
    rng = np.random.default_rng(seed)
    while True:
        g = random_digraph(n, p, rng)
        if undirected_connected(g) and has_odd_cycle(g):
            return g


@pytest.fixture(params=sorted(kernels.backends()))
def backend(request):
    return kernels.backends()[request.param]


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
