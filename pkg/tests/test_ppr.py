import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fedfollow import kernels
from fedfollow.graph import load_edge_list
from fedfollow.ppr import PprConfig, ppr_dense_oracle, ppr_power_iteration, recommend_ppr

from conftest import keyed_graph, random_digraph

# 2x2 solve of r_a = 0.15 + 0.85 r_b, r_b = 0.85 r_a, frozen
R_A = 0.5405405405405405
R_B = 0.4594594594594593


def test_single_node():
    g = load_edge_list("", visited=["solo"])
    vec = ppr_power_iteration(g, 0)
    assert vec.scores.tolist() == [1.0]
    assert vec.converged and vec.iterations_used == 1


def test_two_cycle_closed_form():
    g = load_edge_list("a\tb\nb\ta\n")
    vec = ppr_power_iteration(g, g.id_of("a"))
    assert abs(vec.scores[g.id_of("a")] - R_A) < 1e-9
    assert abs(vec.scores[g.id_of("b")] - R_B) < 1e-9
    oracle = ppr_dense_oracle(g, g.id_of("a"))
    assert np.allclose(oracle.scores[[g.id_of("a"), g.id_of("b")]], [R_A, R_B], atol=1e-12)


def test_matches_dense_oracle_on_random_graphs():
    rng = np.random.default_rng(77)
    worst = 0.0
    for _ in range(100):
        g = random_digraph(20, float(rng.uniform(0.02, 0.3)), rng)
        seed = int(rng.integers(0, 20))
        vec = ppr_power_iteration(g, seed)
        worst = max(worst, float(np.max(np.abs(vec.scores - ppr_dense_oracle(g, seed).scores))))
        assert vec.max_mass_error < 1e-9
    assert worst <= 1e-8


def test_identity_graph_is_seed_indicator():
    g = load_edge_list("", visited=list("abcde"))
    vec = ppr_power_iteration(g, 2)
    assert vec.scores.tolist() == [0.0, 0.0, 1.0, 0.0, 0.0]
    assert ppr_dense_oracle(g, 2).scores.tolist() == [0.0, 0.0, 1.0, 0.0, 0.0]


def test_mass_conserved_on_every_iterate():
    g = random_digraph(200, 0.02, np.random.default_rng(3))
    for backend in kernels.backends().values():
        _, _, _, err = backend.ppr_power(g.out_indptr, g.out_indices, 5, 0.85, 1e-10, 1000)
        assert err < 1e-9


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 30), st.floats(0.0, 0.3), st.integers(0, 2**32 - 1),
       st.floats(0.05, 0.95))
def test_unreachable_nodes_score_zero(n, p, seed, damping):
    g = random_digraph(n, p, np.random.default_rng(seed))
    vec = ppr_power_iteration(g, 0, PprConfig(damping=damping))
    reach = {0}
    stack = [0]
    while stack:
        for v in g.out_neighbors(stack.pop()).tolist():
            if v not in reach:
                reach.add(v)
                stack.append(v)
    for v in range(n):
        if v not in reach:
            assert vec.scores[v] == 0.0
    assert abs(vec.scores.sum() - 1.0) < 1e-9
    assert np.all(vec.scores >= 0)


def test_star_leaves_tie_in_id_order():
    g = keyed_graph(6, [(0, i) for i in range(5, 0, -1)])
    rec = recommend_ppr(g, 0, k=10, filter_followees=False)
    assert rec.items == [1, 2, 3, 4, 5]
    assert len({s for _, s in rec.entries}) == 1
    assert recommend_ppr(g, 0).entries == ()


def test_path_filter():
    g = load_edge_list("a\tb\nb\tc\n")
    a, b, c = (g.id_of(x) for x in "abc")
    assert recommend_ppr(g, a, k=2).items == [c]
    assert recommend_ppr(g, a, k=2, filter_followees=False).items == [b, c]


def test_short_list_when_k_exceeds_candidates():
    g = load_edge_list("a\tb\nb\tc\nc\td\n")
    assert len(recommend_ppr(g, 0, k=100).entries) == 2


def test_non_convergence_is_flagged():
    g = random_digraph(30, 0.2, np.random.default_rng(0))
    rec = recommend_ppr(g, 0, cfg=PprConfig(max_iterations=2))
    assert rec.flags["not_converged"] is True


def test_undirected_variant_reaches_followers():
    g = load_edge_list("b\ta\n")
    assert ppr_power_iteration(g, g.id_of("a")).scores[g.id_of("b")] == 0.0
    assert ppr_power_iteration(g, g.id_of("a"), PprConfig(undirected=True)).scores[g.id_of("b")] > 0


def test_bad_config():
    with pytest.raises(ValueError):
        PprConfig(damping=1.0)
    with pytest.raises(IndexError):
        ppr_power_iteration(load_edge_list("a\tb\n"), 5)
