import numpy as np
from hypothesis import given
from hypothesis import strategies as st

from fedfollow._util import atomic_write_text, derive_seed
from fedfollow.ranking import RankedList, read_jsonl, top_k, write_jsonl


def test_ties_break_by_ascending_id():
    assert top_k([5, 3, 9, 1], [1.0, 2.0, 1.0, 1.0], 10) == ((3, 2.0), (1, 1.0), (5, 1.0), (9, 1.0))


def test_rounding_noise_is_a_tie():
    assert [c for c, _ in top_k([7, 2], [0.3 + 1e-14, 0.3], 2)] == [2, 7]


def test_exclusion_and_positive_filter():
    assert top_k([0, 1, 2, 3], [0.0, 1.0, 2.0, -1.0], 10, exclude={2}) == ((1, 1.0),)
    assert len(top_k([0, 1], [0.0, 0.0], 10, positive_only=False)) == 2


@given(st.lists(st.floats(0, 10, allow_nan=False), max_size=40), st.integers(1, 50))
def test_top_k_invariants(scores, k):
    entries = top_k(np.arange(len(scores)), scores, k)
    assert len(entries) <= k
    assert len({c for c, _ in entries}) == len(entries)
    assert all(a[1] >= b[1] - 1e-10 for a, b in zip(entries, entries[1:]))


def test_jsonl_round_trip():
    rl = RankedList(0, ((1, 0.5), (2, 0.25)), 10, "ppr", {"x": True})
    text = write_jsonl([rl], keys=("a", "b", "c"), damping=0.85)
    rec = read_jsonl(text)[0]
    assert rec["target"] == "a" and rec["entries"] == [["b", 0.5], ["c", 0.25]]
    assert rec["damping"] == 0.85 and rec["flags"] == {"x": True}


def test_derive_seed_is_stable_and_label_sensitive():
    assert derive_seed(1, "cf", "a") == derive_seed(1, "cf", "a")
    assert derive_seed(1, "cf", "a") != derive_seed(1, "cf", "b")
    assert derive_seed(0, "x") == 17199247497253735899


def test_atomic_write(tmp_path):
    p = tmp_path / "sub" / "f.txt"
    atomic_write_text(p, "hello\n")
    assert p.read_text() == "hello\n"
    assert [x.name for x in p.parent.iterdir()] == ["f.txt"]
