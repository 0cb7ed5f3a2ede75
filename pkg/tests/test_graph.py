import io
import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from fedfollow.graph import (
    EmptyGraphError,
    GraphParseError,
    assortativity,
    compute_stats,
    degree,
    diff_edges,
    edge_list_text,
    load_edge_list,
    local_clustering,
    strongly_connected_components,
)

from conftest import graph_from, keyed_graph, random_digraph


def test_empty_input_gives_empty_graph():
    g = load_edge_list("")
    assert g.node_count == 0 and g.edge_count == 0


def test_duplicate_edges_collapse():
    g = load_edge_list("a\tb\na\tb")
    assert (g.node_count, g.edge_count) == (2, 1)


def test_three_cycle_is_one_scc():
    g = load_edge_list("a\tb\nb\tc\nc\ta")
    assert (g.node_count, g.edge_count) == (3, 3)
    assert compute_stats(g).scc_fraction == 1.0


def test_comments_blank_lines_and_self_loops():
    g = load_edge_list("# header\n\na\ta\na\tb\r\n")
    assert g.self_loops_dropped == 1
    assert g.edge_count == 1
    assert g.key_edges() == {("a", "b")}


@pytest.mark.parametrize("text,lineno", [("a\tb\nc\n", 2), ("a\tb\tc\n", 1), ("x\t\n", 1)])
def test_malformed_line_names_line_number(text, lineno):
    with pytest.raises(GraphParseError) as exc:
        load_edge_list(text)
    assert exc.value.lineno == lineno
    assert f"line {lineno}" in str(exc.value)


def test_visited_keys_mark_and_add_isolated_nodes():
    g = load_edge_list("a\tb\n", visited=["a", "z"])
    assert g.visited.tolist() == [True, False, True]
    assert g.keys == ("a", "b", "z")
    assert g.visited_count == 2


def test_adjacency_is_mirrored_and_sorted():
    g = graph_from("a\tc\na\tb\nc\tb\nd\ta\n")
    for u in range(g.node_count):
        out = g.out_neighbors(u).tolist()
        assert out == sorted(set(out))
        for v in out:
            assert u in g.in_neighbors(v).tolist()
    assert g.out_degrees().sum() == g.in_degrees().sum() == g.edge_count


def test_degree_modes():
    g = graph_from("a\tb\nb\ta\n")
    assert degree(g, g.id_of("a"), "total") == 1
    g = graph_from("a\tb\na\tc\nd\ta\ne\tf\n")
    a = g.id_of("a")
    assert (degree(g, a, "out"), degree(g, a, "in"), degree(g, a, "total")) == (2, 1, 3)
    iso = load_edge_list("x\ty\n", visited=["x", "y", "lonely"])
    assert degree(iso, iso.id_of("lonely"), "total") == 0
    with pytest.raises(IndexError):
        degree(g, g.node_count, "out")
    with pytest.raises(ValueError):
        degree(g, 0, "sideways")


def test_stats_examples():
    tri = graph_from("a\tb\nb\ta\nb\tc\nc\tb\na\tc\nc\ta\n")
    assert compute_stats(tri).ncc == 1.0
    cyc = compute_stats(graph_from("a\tb\nb\tc\nc\ta\n"))
    assert cyc.scc_fraction == 1.0 and cyc.avg_degree == 1.0 and cyc.avg_total_degree == 2.0
    star = graph_from("".join(f"hub\tleaf{i}\n" for i in range(5)))
    assert compute_stats(star).ncc == 0.0


def test_stats_on_empty_graph_is_domain_error():
    with pytest.raises(EmptyGraphError):
        compute_stats(load_edge_list(""))


def test_constant_degree_assortativity_is_flagged():
    g = graph_from("a\tb\nb\tc\nc\ta\n")
    value, degenerate = assortativity(g, "out-in")
    assert value == 0.0 and degenerate
    stats = compute_stats(g)
    assert stats.assortativity_degenerate
    assert not any(np.isnan(v) for v in stats.assortativity_all.values())


def test_assortativity_matches_numpy_corrcoef():
    g = random_digraph(40, 0.1, np.random.default_rng(5))
    out, inn = g.out_degrees(), g.in_degrees()
    src = np.repeat(np.arange(g.node_count), out)
    expected = np.corrcoef(out[src], inn[g.out_indices])[0, 1]
    assert assortativity(g, "out-in")[0] == pytest.approx(expected, abs=1e-12)


def test_stats_document_formats():
    stats = compute_stats(graph_from("a\tb\nb\tc\nc\ta\nc\td\n"))
    kv = dict(line.split("=", 1) for line in stats.to_keyvalue().splitlines())
    assert kv["V"] == "4" and kv["E"] == "4"
    assert float(kv["scc_fraction"]) == 0.75
    assert "Assort." in stats.to_table()


def test_diff_edges_examples():
    older = graph_from("a\tb\n")
    assert diff_edges(older, graph_from("a\tb\n")) == {}
    assert diff_edges(older, graph_from("a\tb\na\tc\n")) == {"a": {"c"}}
    # unfollow b, follow c: the removal is ignored
    assert diff_edges(older, graph_from("a\tc\n")) == {"a": {"c"}}
    assert diff_edges(graph_from("p\tq\n"), graph_from("r\ts\n")) == {}


edge_lists = st.lists(
    st.tuples(st.sampled_from("abcdefgh"), st.sampled_from("abcdefgh")), min_size=0, max_size=30
)


@given(edge_lists)
def test_round_trip(edges):
    text = "".join(f"{u}@h\t{v}@h\n" for u, v in edges)
    g = load_edge_list(text)
    again = load_edge_list(edge_list_text(g))
    assert set(again.keys) == set(g.keys)
    assert again.key_edges() == g.key_edges()
    assert edge_list_text(load_edge_list(edge_list_text(again))) == edge_list_text(again)


@given(edge_lists)
def test_degree_sums(edges):
    g = load_edge_list("".join(f"{u}\t{v}\n" for u, v in edges))
    assert g.out_degrees().sum() == g.in_degrees().sum() == g.edge_count


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 25), st.integers(0, 2**32 - 1))
def test_dag_scc_fraction(n, seed):
    rng = np.random.default_rng(seed)
    edges = [(u, v) for u in range(n) for v in range(u + 1, n) if rng.random() < 0.3]
    g = keyed_graph(n, edges)
    assert compute_stats(g).scc_fraction == pytest.approx(1.0 / n)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 40), st.floats(0.0, 0.3), st.integers(0, 2**32 - 1))
def test_scc_matches_scipy(n, p, seed):
    g = random_digraph(n, p, np.random.default_rng(seed))
    ours = strongly_connected_components(g)
    m = csr_matrix((np.ones(g.edge_count), g.out_indices, g.out_indptr), shape=(n, n))
    _, theirs = connected_components(m, directed=True, connection="strong")
    # same partition up to labels
    pairs = set(zip(ours.tolist(), theirs.tolist()))
    assert len(pairs) == len(set(ours.tolist())) == len(set(theirs.tolist()))


def brute_force_clustering(g):
    nb = [set(g.neighbors(u).tolist()) for u in range(g.node_count)]
    out = []
    for u in range(g.node_count):
        d = len(nb[u])
        if d < 2:
            out.append(0.0)
            continue
        links = sum(1 for v, w in itertools.combinations(sorted(nb[u]), 2) if w in nb[v])
        out.append(links / (d * (d - 1) / 2))
    return np.array(out)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 50), st.floats(0.0, 0.4), st.integers(0, 2**32 - 1))
def test_ncc_matches_brute_force(n, p, seed):
    g = random_digraph(n, p, np.random.default_rng(seed))
    assert np.allclose(local_clustering(g), brute_force_clustering(g), atol=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 30), st.integers(0, 2**32 - 1))
def test_stats_label_invariance(n, seed):
    rng = np.random.default_rng(seed)
    g = random_digraph(n, 0.15, rng)
    perm = rng.permutation(n)
    h = keyed_graph(n, [(int(perm[u]), int(perm[v])) for u, v in g.edges()])
    a, b = compute_stats(g), compute_stats(h)
    for field in ("node_count", "edge_count", "scc_fraction", "avg_degree"):
        assert getattr(a, field) == getattr(b, field)
    assert a.ncc == pytest.approx(b.ncc, abs=1e-12)
    for name in a.assortativity_all:
        assert a.assortativity_all[name] == pytest.approx(b.assortativity_all[name], abs=1e-9)


def test_load_from_stream():
    g = load_edge_list(io.StringIO("a\tb\n"))
    assert g.edge_count == 1
