"""Polite fetching of follower/following lists from federated instances.

A :class:`FederationClient` sits between a walk and a provider. It checks the
instance's crawl permission, throttles every content request through a
sliding-window limiter, retries transport failures with doubling backoff,
and keeps a persistent cache of :class:`UserRecord` documents.

Providers implement two methods::

    robots_allowed(instance) -> bool
    fetch(key, endpoint, throttle) -> list[str]

``endpoint`` is ``"following"`` or ``"followers"``. ``throttle()`` must be
called before each network request and returns the granted timestamp.
Providers raise :class:`TransportError` for retryable failures and
:class:`UserGoneError` when the account no longer exists.
"""

from __future__ import annotations

import json
import logging
import math
import re
import threading
import time
import urllib.parse
import urllib.request
import urllib.robotparser
from collections import Counter, deque
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Iterable, Protocol

from .graph import DirectedGraph

log = logging.getLogger(__name__)

OK = "ok"
GONE = "gone"
BLOCKED = "instance_blocked"
DOWN = "instance_down"
STATUSES = (OK, GONE, BLOCKED, DOWN)
ENDPOINTS = ("following", "followers")

_KEY_RE = re.compile(r"^([^@\s/]+)@([^@\s/]+)$")


class InvalidKeyError(ValueError):
    pass


class TransportError(Exception):
    """Retryable failure talking to an instance."""


class UserGoneError(Exception):
    """The account was deleted or never existed."""


def split_key(key: str) -> tuple[str, str]:
    m = _KEY_RE.match(key)
    if m is None:
        raise InvalidKeyError(f"not a user@instance key: {key!r}")
    return m.group(1), m.group(2)


def instance_of(key: str) -> str:
    return split_key(key)[1]


def _to_rfc3339(ts: datetime) -> str:
    return ts.astimezone(timezone.utc).isoformat().replace("+00:00", "Z")


def _from_rfc3339(text: str) -> datetime:
    return datetime.fromisoformat(text.replace("Z", "+00:00"))


@dataclass(frozen=True)
class UserRecord:
    external_key: str
    instance: str
    following: tuple[str, ...] | None
    followers: tuple[str, ...] | None
    fetched_at: datetime
    status: str = OK

    def __post_init__(self):
        if self.status not in STATUSES:
            raise ValueError(f"unknown status {self.status!r}")
        if instance_of(self.external_key) != self.instance:
            raise ValueError("instance does not match the key's host part")
        have_lists = self.following is not None and self.followers is not None
        if (self.status == OK) != have_lists:
            raise ValueError("lists are present exactly when status is ok")

    @property
    def ok(self) -> bool:
        return self.status == OK

    def neighbors(self) -> list[str]:
        """Undirected neighbour keys, sorted, without the user itself."""
        if not self.ok:
            return []
        return sorted((set(self.following) | set(self.followers)) - {self.external_key})

    def to_json(self) -> str:
        return json.dumps(
            {
                "external_key": self.external_key,
                "instance": self.instance,
                "following": None if self.following is None else list(self.following),
                "followers": None if self.followers is None else list(self.followers),
                "fetched_at": _to_rfc3339(self.fetched_at),
                "status": self.status,
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "UserRecord":
        d = json.loads(text)
        return cls(
            external_key=d["external_key"],
            instance=d["instance"],
            following=None if d.get("following") is None else tuple(d["following"]),
            followers=None if d.get("followers") is None else tuple(d["followers"]),
            fetched_at=_from_rfc3339(d["fetched_at"]),
            status=d["status"],
        )


@dataclass(frozen=True)
class PolitenessPolicy:
    max_requests_per_second: float = 10.0
    respect_robots: bool = True
    max_retries: int = 2
    backoff_seconds: float = 1.0
    max_age_seconds: float | None = None

    def __post_init__(self):
        if not self.max_requests_per_second > 0:
            raise ValueError("max_requests_per_second must be positive")
        if self.max_retries < 0:
            raise ValueError("max_retries must be non-negative")


# --- clocks -----------------------------------------------------------------

class SystemClock:
    def now(self) -> float:
        return time.time()

    def sleep_until(self, t: float) -> None:
        delay = t - time.time()
        if delay > 0:
            time.sleep(delay)


class VirtualClock:
    """Deterministic clock; sleeping advances time instantly."""

    # 2018-05-16T00:00:00Z
    DEFAULT_START = 1526428800.0

    def __init__(self, start: float = DEFAULT_START):
        self._now = float(start)
        self._lock = threading.Lock()

    def now(self) -> float:
        with self._lock:
            return self._now

    def sleep_until(self, t: float) -> None:
        with self._lock:
            if t > self._now:
                self._now = t

    def advance(self, dt: float) -> None:
        with self._lock:
            self._now += dt


class RateLimiter:
    """Sliding-log limiter: at most ``rate`` grants in any 1-second window.

    ``reserve`` books the earliest admissible slot without blocking;
    ``acquire`` also sleeps on the clock until that slot. Windows are
    half-open, so grants at t and t+1 never share one.
    """

    def __init__(self, policy: PolitenessPolicy, clock):
        self.rate = policy.max_requests_per_second
        self.clock = clock
        self._capacity = max(1, int(self.rate)) if self.rate >= 1 else 1
        self._span = 1.0 if self.rate >= 1 else 1.0 / self.rate
        self._recent: deque[float] = deque(maxlen=self._capacity)
        self._lock = threading.Lock()
        self.granted: list[float] = []

    def reserve(self) -> float:
        with self._lock:
            t = self.clock.now()
            if len(self._recent) == self._capacity:
                oldest = self._recent[0]
                t = max(t, oldest + self._span)
                # addition can round down; the gap itself must reach the span
                while t - oldest < self._span:
                    t = math.nextafter(t, math.inf)
            self._recent.append(t)
            self.granted.append(t)
            return t

    def acquire(self) -> float:
        t = self.reserve()
        self.clock.sleep_until(t)
        return t


def rate_limiter_acquire(limiter: RateLimiter) -> float:
    return limiter.acquire()


def max_requests_in_window(times: Iterable[float], window: float = 1.0) -> int:
    """Largest number of timestamps inside any half-open window of ``window`` seconds."""
    ts = sorted(times)
    best = 0
    lo = 0
    for hi, t in enumerate(ts):
        while t - ts[lo] >= window:
            lo += 1
        best = max(best, hi - lo + 1)
    return best


# --- cache ------------------------------------------------------------------

class CacheStore:
    """Map of key -> :class:`UserRecord`, optionally backed by a JSON-lines file.

    Writes append one document per record; on load the last document for a
    key wins, so the file can be appended to across runs.
    """

    def __init__(self, path: str | Path | None = None):
        self.path = Path(path) if path is not None else None
        self._data: dict[str, UserRecord] = {}
        self._lock = threading.Lock()
        if self.path is not None and self.path.exists():
            with self.path.open(encoding="utf-8") as fh:
                for line in fh:
                    if line.strip():
                        rec = UserRecord.from_json(line)
                        self._data[rec.external_key] = rec

    def get(self, key: str) -> UserRecord | None:
        with self._lock:
            return self._data.get(key)

    def put(self, record: UserRecord) -> None:
        with self._lock:
            self._data[record.external_key] = record
            if self.path is not None:
                self.path.parent.mkdir(parents=True, exist_ok=True)
                with self.path.open("a", encoding="utf-8") as fh:
                    fh.write(record.to_json() + "\n")

    def __contains__(self, key: str) -> bool:
        return self.get(key) is not None

    def __len__(self) -> int:
        return len(self._data)


# --- providers --------------------------------------------------------------

class Provider(Protocol):
    def robots_allowed(self, instance: str) -> bool: ...

    def fetch(self, key: str, endpoint: str, throttle: Callable[[], float]) -> list[str]: ...


class SimulatedProvider:
    """Answers fetches from an in-memory world graph.

    ``failure_plan`` maps an instance to ``instance_blocked`` (crawling
    disallowed), ``instance_down`` (every request fails) or ``gone`` (all
    its users deleted). ``flaky`` maps a key to the number of transport
    failures to inject before it answers.
    """

    def __init__(
        self,
        world: DirectedGraph,
        failure_plan: dict[str, str] | None = None,
        flaky: dict[str, int] | None = None,
    ):
        self.world = world
        self.failure_plan = dict(failure_plan or {})
        for inst, status in self.failure_plan.items():
            if status not in (BLOCKED, DOWN, GONE):
                raise ValueError(f"unsupported planned status {status!r} for {inst}")
        self._flaky = dict(flaky or {})
        self._lock = threading.Lock()
        self.calls: Counter[str] = Counter()
        self.requests: list[tuple[float, str, str]] = []
        self.robots_checks = 0

    def robots_allowed(self, instance: str) -> bool:
        with self._lock:
            self.robots_checks += 1
        plan = self.failure_plan.get(instance)
        if plan == DOWN:
            raise TransportError(f"{instance} is down")
        return plan != BLOCKED

    def fetch(self, key: str, endpoint: str, throttle: Callable[[], float]) -> list[str]:
        t = throttle()
        with self._lock:
            self.calls[endpoint] += 1
            self.requests.append((t, key, endpoint))
            if self._flaky.get(key, 0) > 0:
                self._flaky[key] -= 1
                raise TransportError(f"injected failure for {key}")
        plan = self.failure_plan.get(instance_of(key))
        if plan == DOWN:
            raise TransportError(f"{instance_of(key)} is down")
        u = self.world.index.get(key)
        if u is None or plan == GONE:
            raise UserGoneError(key)
        nbrs = self.world.out_neighbors(u) if endpoint == "following" else self.world.in_neighbors(u)
        return [self.world.keys[v] for v in nbrs.tolist()]

    @property
    def pair_count(self) -> int:
        """Completed following+followers request pairs."""
        return min(self.calls["following"], self.calls["followers"])

    @property
    def content_requests(self) -> int:
        return sum(self.calls.values())


def simulated_provider(world: DirectedGraph, failure_plan: dict[str, str] | None = None) -> SimulatedProvider:
    return SimulatedProvider(world, failure_plan)


class HttpProvider:
    """Live provider for Mastodon-style ``/users/<name>/<endpoint>.json`` collections.

    Follows ``first``/``next`` page links and maps actor URLs of the form
    ``https://host/users/name`` to ``name@host``. ``opener`` takes a URL and
    returns the response body; it defaults to ``urllib``.
    """

    def __init__(self, opener: Callable[[str], bytes] | None = None, user_agent: str = "fedfollow",
                 max_pages: int = 100, timeout: float = 20.0):
        self.user_agent = user_agent
        self.max_pages = max_pages
        self.timeout = timeout
        self._opener = opener or self._urlopen
        self._robots: dict[str, bool] = {}

    def _urlopen(self, url: str) -> bytes:
        req = urllib.request.Request(url, headers={"User-Agent": self.user_agent,
                                                   "Accept": "application/activity+json"})
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                return resp.read()
        except urllib.error.HTTPError as exc:
            if exc.code in (404, 410):
                raise UserGoneError(url) from exc
            raise TransportError(str(exc)) from exc
        except OSError as exc:
            raise TransportError(str(exc)) from exc

    def robots_allowed(self, instance: str) -> bool:
        if instance not in self._robots:
            rp = urllib.robotparser.RobotFileParser()
            try:
                rp.parse(self._opener(f"https://{instance}/robots.txt").decode("utf-8", "replace").splitlines())
                self._robots[instance] = rp.can_fetch(self.user_agent, f"https://{instance}/users/")
            except UserGoneError:
                # no robots.txt at all: nothing is disallowed
                self._robots[instance] = True
        return self._robots[instance]

    @staticmethod
    def actor_to_key(actor: str) -> str | None:
        parts = urllib.parse.urlsplit(actor)
        segs = [s for s in parts.path.split("/") if s]
        if parts.hostname and len(segs) == 2 and segs[0] == "users":
            return f"{segs[1]}@{parts.hostname}"
        if parts.hostname and len(segs) == 1 and segs[0].startswith("@"):
            return f"{segs[0][1:]}@{parts.hostname}"
        return None

    def fetch(self, key: str, endpoint: str, throttle: Callable[[], float]) -> list[str]:
        user, host = split_key(key)
        url: str | None = f"https://{host}/users/{user}/{endpoint}.json"
        out: list[str] = []
        pages = 0
        while url and pages < self.max_pages:
            throttle()
            doc = json.loads(self._opener(url))
            pages += 1
            items = doc.get("orderedItems", doc.get("items"))
            if items is None:
                first = doc.get("first")
                url = first if isinstance(first, str) else None
                if isinstance(first, dict):
                    items = first.get("orderedItems", [])
                    url = first.get("next")
                if items is None:
                    continue
            else:
                url = doc.get("next")
            for actor in items:
                k = self.actor_to_key(actor if isinstance(actor, str) else actor.get("id", ""))
                if k is not None:
                    out.append(k)
        return out


# --- client -----------------------------------------------------------------

@dataclass
class FetchCounters:
    cache_hits: int = 0
    fetches: int = 0
    blocked: int = 0
    down: int = 0
    gone: int = 0
    retries: int = 0
    failures: list = field(default_factory=list)


class FederationClient:
    """Cached, throttled access to a provider; safe for concurrent callers."""

    def __init__(self, provider: Provider, policy: PolitenessPolicy | None = None,
                 cache: CacheStore | None = None, clock=None):
        self.provider = provider
        self.policy = policy or PolitenessPolicy()
        self.cache = cache if cache is not None else CacheStore()
        self.clock = clock or VirtualClock()
        self.limiter = RateLimiter(self.policy, self.clock)
        self.counters = FetchCounters()
        self._robots: dict[str, str] = {}
        self._lock = threading.Lock()
        self._key_locks: dict[str, threading.Lock] = {}

    def _key_lock(self, key: str) -> threading.Lock:
        with self._lock:
            return self._key_locks.setdefault(key, threading.Lock())

    def _instance_status(self, instance: str) -> str:
        """OK, BLOCKED or DOWN; decided once per instance before any content request."""
        with self._lock:
            cached = self._robots.get(instance)
        if cached is not None:
            return cached
        delay = self.policy.backoff_seconds
        status = DOWN
        for attempt in range(self.policy.max_retries + 1):
            try:
                allowed = self.provider.robots_allowed(instance)
            except TransportError:
                if attempt < self.policy.max_retries:
                    self.clock.sleep_until(self.clock.now() + delay)
                    delay *= 2
                continue
            status = OK if allowed or not self.policy.respect_robots else BLOCKED
            break
        with self._lock:
            self._robots[instance] = status
        return status

    def _fresh(self, rec: UserRecord) -> bool:
        max_age = self.policy.max_age_seconds
        if max_age is None:
            return True
        age = self.clock.now() - rec.fetched_at.timestamp()
        return age <= max_age

    def _record(self, key: str, instance: str, status: str, following=None, followers=None) -> UserRecord:
        when = datetime.fromtimestamp(self.clock.now(), timezone.utc)
        return UserRecord(key, instance, following, followers, when, status)

    def _fetch_endpoint(self, key: str, endpoint: str) -> list[str]:
        delay = self.policy.backoff_seconds
        for attempt in range(self.policy.max_retries + 1):
            try:
                return self.provider.fetch(key, endpoint, self.limiter.acquire)
            except TransportError:
                if attempt == self.policy.max_retries:
                    raise
                with self._lock:
                    self.counters.retries += 1
                self.clock.sleep_until(self.clock.now() + delay)
                delay *= 2
        raise AssertionError("unreachable")

    def fetch_user(self, key: str) -> UserRecord:
        _, instance = split_key(key)
        with self._key_lock(key):
            rec = self.cache.get(key)
            if rec is not None and self._fresh(rec):
                with self._lock:
                    self.counters.cache_hits += 1
                return rec
            with self._lock:
                self.counters.fetches += 1
            inst_status = self._instance_status(instance)
            if inst_status != OK:
                rec = self._record(key, instance, inst_status)
            else:
                try:
                    following = self._fetch_endpoint(key, "following")
                    followers = self._fetch_endpoint(key, "followers")
                    rec = self._record(key, instance, OK, tuple(following), tuple(followers))
                except UserGoneError:
                    rec = self._record(key, instance, GONE)
                except TransportError as exc:
                    log.warning("giving up on %s: %s", key, exc)
                    rec = self._record(key, instance, DOWN)
            if not rec.ok:
                with self._lock:
                    attr = {BLOCKED: "blocked", DOWN: "down", GONE: "gone"}[rec.status]
                    setattr(self.counters, attr, getattr(self.counters, attr) + 1)
                    self.counters.failures.append((key, rec.status))
            self.cache.put(rec)
            return rec


def fetch_user(key: str, client: FederationClient) -> UserRecord:
    return client.fetch_user(key)
