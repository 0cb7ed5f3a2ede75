import numpy as np
import pytest

from fedfollow.evaluation import build_snapshot_pair
from fedfollow.graph import diff_edges, edge_list_text
from fedfollow.synth import SynthConfig, generate


@pytest.mark.parametrize("model", ["planted-community", "preferential-attachment"])
def test_deterministic_and_additive(model):
    cfg = SynthConfig(n=100, model=model, seed=3, changed_users=20)
    a, b = generate(cfg), generate(cfg)
    assert edge_list_text(a.t1) == edge_list_text(b.t1)
    assert edge_list_text(a.t2) == edge_list_text(b.t2)
    assert a.t2.edge_count >= a.t1.edge_count
    assert a.t1.key_edges() <= a.t2.key_edges()
    assert edge_list_text(generate(SynthConfig(n=100, model=model, seed=4)).t1) != edge_list_text(a.t1)


def test_new_follows_match_diff():
    w = generate(SynthConfig(n=200, seed=1, changed_users=30))
    diff = diff_edges(w.t1, w.t2)
    expected = {w.t1.keys[u]: {w.t1.keys[v] for v in vs} for u, vs in w.new_follows.items() if vs}
    assert diff == expected
    assert len(build_snapshot_pair(w.t1, w.t2).eval_targets) == len(expected)


def test_mean_new_follows_is_configurable():
    w = generate(SynthConfig(n=1000, seed=7, changed_users=100, mean_new_follows=6.0))
    assert 5.0 <= w.manifest()["mean_new_follows"] <= 7.0
    w = generate(SynthConfig(n=1000, seed=7, changed_users=100, mean_new_follows=3.0))
    assert 2.0 <= w.manifest()["mean_new_follows"] <= 4.0


def test_planted_communities_dominate_new_follows():
    w = generate(SynthConfig(n=500, seed=2, changed_users=50))
    pairs = [(u, v) for u, vs in w.new_follows.items() for v in vs]
    same = np.mean([w.community[u] == w.community[v] for u, v in pairs])
    assert same > 0.7


def test_invalid_config():
    with pytest.raises(ValueError):
        SynthConfig(model="lattice")
    with pytest.raises(ValueError):
        SynthConfig(n=5)
    with pytest.raises(ValueError):
        SynthConfig(n=20, changed_users=30)
