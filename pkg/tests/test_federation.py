import threading
from datetime import datetime, timezone

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fedfollow.federation import (
    BLOCKED,
    DOWN,
    GONE,
    OK,
    CacheStore,
    FederationClient,
    InvalidKeyError,
    PolitenessPolicy,
    RateLimiter,
    SimulatedProvider,
    UserRecord,
    VirtualClock,
    fetch_user,
    max_requests_in_window,
    rate_limiter_acquire,
    simulated_provider,
    split_key,
)
from fedfollow.graph import load_edge_list

WORLD = load_edge_list("a@x\tb@y\nb@y\tc@z\nc@z\ta@x\nd@w\ta@x\n")


def client_for(world=WORLD, plan=None, flaky=None, policy=None, cache=None):
    provider = SimulatedProvider(world, plan, flaky)
    return FederationClient(provider, policy or PolitenessPolicy(), cache, VirtualClock()), provider


def test_provider_echo():
    client, _ = client_for()
    rec = fetch_user("a@x", client)
    assert rec.status == OK
    assert rec.following == ("b@y",)
    assert rec.followers == ("c@z", "d@w")
    assert rec.instance == "x"


def test_cache_hit_makes_no_provider_calls():
    client, provider = client_for()
    first = client.fetch_user("a@x")
    before = provider.content_requests
    second = client.fetch_user("a@x")
    assert second == first
    assert provider.content_requests == before
    assert client.counters.cache_hits == 1


def test_two_distinct_fetches_are_two_pairs():
    client, provider = client_for()
    client.fetch_user("a@x")
    client.fetch_user("b@y")
    assert provider.pair_count == 2


def test_blocked_instance_gets_no_content_requests():
    client, provider = client_for(plan={"y": BLOCKED})
    rec = client.fetch_user("b@y")
    assert rec.status == BLOCKED
    assert rec.following is None and rec.followers is None
    assert not any(key.endswith("@y") for _, key, _ in provider.requests)


def test_down_instance_is_a_record_not_an_exception():
    client, provider = client_for(plan={"y": DOWN})
    rec = client.fetch_user("b@y")
    assert rec.status == DOWN
    assert provider.content_requests == 0
    # retries happened on the instance check and were spaced by backoff
    assert provider.robots_checks == 3
    assert client.fetch_user("a@x").ok


def test_missing_user_is_gone():
    client, _ = client_for()
    assert client.fetch_user("nobody@x").status == GONE
    client, _ = client_for(plan={"z": GONE})
    assert client.fetch_user("c@z").status == GONE


def test_flaky_key_recovers_within_retry_budget():
    client, provider = client_for(flaky={"a@x": 2})
    clock = client.clock
    t0 = clock.now()
    rec = client.fetch_user("a@x")
    assert rec.ok
    assert client.counters.retries == 2
    # backoff of 1 s then 2 s
    assert clock.now() - t0 >= 3.0


def test_flaky_key_beyond_budget_is_down():
    client, _ = client_for(flaky={"a@x": 3})
    assert client.fetch_user("a@x").status == DOWN


def test_malformed_key():
    client, _ = client_for()
    for bad in ("nohost", "a@b@c", "@x", "a@", "a b@x"):
        with pytest.raises(InvalidKeyError):
            client.fetch_user(bad)
    assert split_key("alice@mastodon.social") == ("alice", "mastodon.social")


def test_record_is_immutable_and_validated():
    rec = UserRecord("a@x", "x", ("b@y",), (), datetime(2018, 5, 16, tzinfo=timezone.utc))
    with pytest.raises(Exception):
        rec.following = ()
    with pytest.raises(ValueError):
        UserRecord("a@x", "y", (), (), rec.fetched_at)
    with pytest.raises(ValueError):
        UserRecord("a@x", "x", None, None, rec.fetched_at, OK)
    assert UserRecord.from_json(rec.to_json()) == rec
    assert '"fetched_at": "2018-05-16T00:00:00Z"' in rec.to_json()


def test_cache_persists_across_clients(tmp_path):
    path = tmp_path / "cache.jsonl"
    client, _ = client_for(cache=CacheStore(path))
    first = client.fetch_user("a@x")
    client.fetch_user("b@y")
    client2, provider2 = client_for(cache=CacheStore(path))
    assert client2.fetch_user("a@x") == first
    assert provider2.content_requests == 0
    assert len(path.read_text().splitlines()) == 2


def test_max_age_expires_cache():
    client, provider = client_for(policy=PolitenessPolicy(max_age_seconds=60))
    client.fetch_user("a@x")
    client.clock.advance(61)
    client.fetch_user("a@x")
    assert provider.pair_count == 2


def test_robots_can_be_ignored_by_policy():
    client, _ = client_for(plan={"y": BLOCKED}, policy=PolitenessPolicy(respect_robots=False))
    assert client.fetch_user("b@y").ok


# --- rate limiter -----------------------------------------------------------

def limiter(rate):
    return RateLimiter(PolitenessPolicy(max_requests_per_second=rate), VirtualClock(0.0))


def test_ten_at_time_zero_share_a_second():
    lim = limiter(10)
    times = [rate_limiter_acquire(lim) for _ in range(10)]
    assert max(times) < 1.0


def test_eleventh_is_delayed():
    lim = limiter(10)
    for _ in range(10):
        lim.reserve()
    assert lim.reserve() >= 0.1


def test_limit_one_spaces_by_a_second():
    lim = limiter(1)
    a = lim.acquire()
    b = lim.acquire()
    assert b - a >= 1.0


def test_fractional_rate():
    lim = limiter(0.5)
    a, b = lim.acquire(), lim.acquire()
    assert b - a >= 2.0


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 20), st.lists(st.floats(0, 3), min_size=1, max_size=80))
def test_window_never_exceeds_rate(rate, gaps):
    lim = limiter(rate)
    for g in gaps:
        lim.clock.advance(g)
        lim.acquire()
    assert max_requests_in_window(lim.granted) <= rate


def test_window_counter():
    assert max_requests_in_window([0, 0.5, 0.99, 1.0, 1.5]) == 3
    assert max_requests_in_window([]) == 0


def test_concurrent_fetches_respect_rate_and_single_flight():
    keys = [f"u{i}@h{i % 3}" for i in range(60)]
    world = load_edge_list("".join(f"{keys[i]}\t{keys[(i + 1) % 60]}\n" for i in range(60)))
    client, provider = client_for(world, policy=PolitenessPolicy(max_requests_per_second=5))
    errors = []

    def worker(offset):
        try:
            for i in range(60):
                client.fetch_user(keys[(i + offset) % 60])
        except Exception as exc:  # pragma: no cover - reported below
            errors.append(exc)

    threads = [threading.Thread(target=worker, args=(o,)) for o in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert not errors
    assert provider.pair_count == 60
    assert provider.content_requests == 120
    assert max_requests_in_window(t for t, _, _ in provider.requests) <= 5


def test_simulated_provider_rejects_unknown_plan():
    with pytest.raises(ValueError):
        simulated_provider(WORLD, {"x": "sideways"})
