"""Command-line front end.

Every command takes ``--config FILE`` (a JSON object, either flat or keyed
by command name); explicit flags override it. Each run writes the resolved
configuration next to its outputs so it can be replayed exactly.

Exit codes: 0 success, 1 usage error, 2 data error, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import __version__
from ._util import atomic_write_text, derive_seed, dumps
from .cf import STRATEGIES, ProfileIndex, recommend_cf, recommend_random
from .evaluation import (
    MismatchedTargetsError,
    attribute_clicks,
    balanced_interleave,
    build_snapshot_pair,
    evaluate_runs,
    run_experiment,
)
from .federation import (
    CacheStore,
    FederationClient,
    HttpProvider,
    InvalidKeyError,
    PolitenessPolicy,
    SimulatedProvider,
    SystemClock,
    VirtualClock,
)
from .graph import DirectedGraph, GraphParseError, compute_stats, edge_list_text, load_edge_list
from .ppr import PprConfig, recommend_ppr
from .ranking import read_jsonl, write_jsonl
from .sampler import SampleResult, UnfetchableStartError, WalkConfig, WalkStuckError, ego_walk, mhrw_sample
from .synth import MODELS, SynthConfig, generate

log = logging.getLogger("fedfollow")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_RUNTIME = 0, 1, 2, 3
SYSTEMS = ("random", "cf:following", "cf:followers", "cf:combined", "ppr")
SYSTEM_LABELS = {
    "random": "Random",
    "cf:following": "Profile (following)",
    "cf:followers": "Profile (followers)",
    "cf:combined": "Profile (combined)",
    "ppr": "Pers. PageRank",
}


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


DEFAULTS: dict[str, dict[str, Any]] = {
    "synth": {"n": 1000, "model": "planted-community", "seed": 0, "communities": 10, "instances": 20,
              "mean_out_degree": 10.0, "p_in": 0.85, "changed_users": 100, "mean_new_follows": 6.0,
              "out_dir": "."},
    "stats": {"graph": None, "visited": None, "assortativity": "out-in", "out": None},
    "sample": {"world": None, "live": False, "start": None, "iterations": 5500, "seed": 0, "rate": 10.0,
               "failure_plan": None, "cache": None, "respect_robots": True, "out_dir": "."},
    "vicinity": {"world": None, "live": False, "start": None, "iterations": 200, "gamma": 0.8, "seed": 0,
                 "rate": 10.0, "failure_plan": None, "cache": None, "respect_robots": True, "out_dir": "."},
    "recommend": {"graph": None, "visited": None, "system": "ppr", "targets": None, "k": 100, "seed": 0,
                  "damping": 0.85, "k1": 1.2, "b": 0.75, "filter_followees": True, "out": "recommendations.jsonl"},
    "evaluate": {"t1": None, "t2": None, "t1_visited": None, "t2_visited": None, "systems": ",".join(SYSTEMS),
                 "runs": None, "k": 100, "seed": 0, "damping": 0.85, "k1": 1.2, "b": 0.75,
                 "filter_followees": True, "out_dir": "."},
    "interleave": {"a": None, "b": None, "clicks": "", "seed": 0, "display_size": 10, "out": None},
    "report": {"curve": None, "out": "curve.svg", "title": "Precision at k"},
}


def _bool(text: str) -> bool:
    low = str(text).lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"not a boolean: {text!r}")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="fedfollow", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    S = argparse.SUPPRESS

    def cmd(name, help_):
        sp = sub.add_parser(name, help=help_, argument_default=S)
        sp.add_argument("--config", help="JSON config file")
        return sp

    sp = cmd("synth", "generate a synthetic t1/t2 snapshot pair")
    sp.add_argument("--n", type=int)
    sp.add_argument("--model", choices=MODELS)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--communities", type=int)
    sp.add_argument("--instances", type=int)
    sp.add_argument("--mean-out-degree", type=float)
    sp.add_argument("--p-in", type=float)
    sp.add_argument("--changed-users", type=int)
    sp.add_argument("--mean-new-follows", type=float)
    sp.add_argument("--out-dir")

    sp = cmd("stats", "print graph statistics")
    sp.add_argument("graph", nargs="?")
    sp.add_argument("--visited", help="file with one visited key per line, or a sample manifest")
    sp.add_argument("--assortativity", choices=("out-in", "out-out", "in-in", "in-out", "undirected"))
    sp.add_argument("--out", help="write the key=value document here")

    for name, help_ in (("sample", "MHRW crawl"), ("vicinity", "egocentric restart walk around one user")):
        sp = cmd(name, help_)
        sp.add_argument("--world", help="edge list served by the simulated provider")
        sp.add_argument("--live", type=_bool, help="query real instances over HTTP")
        sp.add_argument("--start")
        sp.add_argument("--iterations", type=int)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--rate", type=float, help="max requests per second")
        sp.add_argument("--failure-plan", help="JSON map instance -> status")
        sp.add_argument("--cache", help="JSON-lines cache file")
        sp.add_argument("--respect-robots", type=_bool)
        sp.add_argument("--out-dir")
        if name == "vicinity":
            sp.add_argument("--gamma", type=float)

    sp = cmd("recommend", "produce ranked lists")
    sp.add_argument("--graph")
    sp.add_argument("--visited")
    sp.add_argument("--system")
    sp.add_argument("--targets", help="comma-separated keys, or @file with one key per line")
    sp.add_argument("--k", type=int)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--damping", type=float)
    sp.add_argument("--k1", type=float)
    sp.add_argument("--b", type=float)
    sp.add_argument("--filter-followees", type=_bool)
    sp.add_argument("--out")

    sp = cmd("evaluate", "offline evaluation on a snapshot pair")
    sp.add_argument("--t1")
    sp.add_argument("--t2")
    sp.add_argument("--t1-visited")
    sp.add_argument("--t2-visited")
    sp.add_argument("--systems")
    sp.add_argument("--runs", help="comma-separated name=recommendations.jsonl")
    sp.add_argument("--k", type=int)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--damping", type=float)
    sp.add_argument("--k1", type=float)
    sp.add_argument("--b", type=float)
    sp.add_argument("--filter-followees", type=_bool)
    sp.add_argument("--out-dir")

    sp = cmd("interleave", "balanced interleaving verdict for two ranked lists")
    sp.add_argument("--a", help="comma-separated items or a recommendations .jsonl file")
    sp.add_argument("--b")
    sp.add_argument("--clicks")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--display-size", type=int)
    sp.add_argument("--out")

    sp = cmd("report", "render a p@k curve CSV to SVG")
    sp.add_argument("--curve")
    sp.add_argument("--out")
    sp.add_argument("--title")
    return p


def resolve_config(command: str, explicit: dict) -> dict:
    cfg = dict(DEFAULTS[command])
    path = explicit.pop("config", None)
    if path:
        try:
            loaded = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise DataError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(loaded, dict):
            raise UsageError("config file must hold a JSON object")
        section = loaded.get(command, loaded)
        unknown = sorted(set(section) - set(cfg) - set(DEFAULTS))
        if unknown:
            raise UsageError(f"unknown config keys for {command}: {', '.join(unknown)}")
        cfg.update({k: v for k, v in section.items() if k in cfg})
    cfg.update(explicit)
    return cfg


# --- helpers ----------------------------------------------------------------

def _read(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc


def _visited_keys(path: str | None) -> list[str] | None:
    if not path:
        return None
    text = _read(path)
    if path.endswith(".json"):
        doc = json.loads(text)
        return list(doc["known_adjacency"])
    return [line.strip() for line in text.splitlines() if line.strip() and not line.startswith("#")]


def _load_graph(path: str | None, visited: str | None = None, what: str = "graph") -> DirectedGraph:
    if not path:
        raise UsageError(f"missing {what} path")
    text = _read(path)
    try:
        return load_edge_list(text, visited=_visited_keys(visited))
    except GraphParseError as exc:
        raise DataError(f"{path}: {exc}") from exc


def _require(cfg: dict, *names: str) -> None:
    missing = [n for n in names if cfg.get(n) in (None, "")]
    if missing:
        raise UsageError("missing required option(s): " + ", ".join("--" + m.replace("_", "-") for m in missing))


def _make_recommender(name: str, g: DirectedGraph, cfg: dict) -> Callable:
    seed, k = cfg["seed"], cfg["k"]
    filt = cfg["filter_followees"]
    if name == "random":
        return lambda t: recommend_random(g, t, k, rng=derive_seed(seed, name, g.keys[t]), filter_followees=filt)
    if name.startswith("cf:") and name[3:] in STRATEGIES:
        index = ProfileIndex.build(g, name[3:], k1=cfg["k1"], b=cfg["b"])
        return lambda t: recommend_cf(index, g, t, k, rng=derive_seed(seed, name, g.keys[t]), filter_followees=filt)
    if name == "ppr":
        pcfg = PprConfig(damping=cfg["damping"])
        return lambda t: recommend_ppr(g, t, k, pcfg, filter_followees=filt)
    raise UsageError(f"unknown system {name!r}; valid: {', '.join(SYSTEMS)}")


def _client(cfg: dict) -> tuple[FederationClient, Any]:
    policy = PolitenessPolicy(max_requests_per_second=cfg["rate"], respect_robots=cfg["respect_robots"])
    cache = CacheStore(cfg["cache"]) if cfg["cache"] else CacheStore()
    if cfg["live"]:
        return FederationClient(HttpProvider(), policy, cache, SystemClock()), None
    _require(cfg, "world")
    world = _load_graph(cfg["world"], what="world")
    plan = json.loads(_read(cfg["failure_plan"])) if cfg["failure_plan"] else {}
    try:
        provider = SimulatedProvider(world, plan)
    except ValueError as exc:
        raise DataError(str(exc)) from exc
    return FederationClient(provider, policy, cache, VirtualClock()), provider


# --- commands ---------------------------------------------------------------

def cmd_synth(cfg: dict) -> int:
    fields = {k: cfg[k] for k in DEFAULTS["synth"] if k != "out_dir"}
    try:
        scfg = SynthConfig(**fields)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    world = generate(scfg)
    out = Path(cfg["out_dir"])
    atomic_write_text(out / "t1.tsv", edge_list_text(world.t1))
    atomic_write_text(out / "t2.tsv", edge_list_text(world.t2))
    atomic_write_text(out / "synth_manifest.json", dumps({**world.manifest(), "resolved_config": cfg}))
    print(f"wrote {out / 't1.tsv'} ({world.t1.edge_count} edges) and {out / 't2.tsv'} ({world.t2.edge_count} edges)")
    return EXIT_OK


def cmd_stats(cfg: dict) -> int:
    g = _load_graph(cfg["graph"], cfg["visited"])
    if g.node_count == 0:
        raise DataError("graph is empty")
    stats = compute_stats(g, cfg["assortativity"])
    label = Path(cfg["graph"]).stem
    sys.stdout.write(stats.to_table(label))
    sys.stdout.write("\n" + stats.to_keyvalue())
    if g.self_loops_dropped:
        print(f"# dropped {g.self_loops_dropped} self-loop(s)")
    if cfg["out"]:
        atomic_write_text(cfg["out"], stats.to_keyvalue())
    return EXIT_OK


def _walk_cmd(cfg: dict, kind: str) -> int:
    _require(cfg, "start")
    client, provider = _client(cfg)
    if kind == "mhrw":
        wcfg = WalkConfig(iterations=cfg["iterations"], rng_seed=cfg["seed"])
        result = mhrw_sample(cfg["start"], wcfg, client)
        stem = "sample"
    else:
        wcfg = WalkConfig(iterations=cfg["iterations"], rng_seed=cfg["seed"], restart_probability=1.0 - cfg["gamma"])
        result = ego_walk(cfg["start"], wcfg, client)
        stem = "vicinity"
    out = Path(cfg["out_dir"])
    manifest = result.manifest()
    manifest["resolved_config"] = cfg
    if provider is not None:
        manifest["provider_requests"] = provider.content_requests
    atomic_write_text(out / f"{stem}.tsv", result.edge_list())
    atomic_write_text(out / f"{stem}_manifest.json", dumps(manifest))
    c = result.counters
    print(f"iterations={len(result.visited_order)} unique_visited={len(result.unique_visited)} "
          f"fetched={len(result.fetched)} cache_hits={c['cache_hits']} blocked={c['blocked']} "
          f"down={c['down']} gone={c['gone']} nodes={result.subgraph.node_count} edges={result.subgraph.edge_count}")
    return EXIT_OK


def _targets(spec: str | None, g: DirectedGraph) -> list[int]:
    if not spec:
        return np.flatnonzero(g.visited).tolist()
    keys = _read(spec[1:]).split() if spec.startswith("@") else [k for k in spec.split(",") if k]
    missing = [k for k in keys if k not in g.index]
    if missing:
        raise DataError(f"unknown target {missing[0]!r}")
    return [g.index[k] for k in keys]


def cmd_recommend(cfg: dict) -> int:
    if cfg["system"] not in SYSTEMS:
        raise UsageError(f"unknown system {cfg['system']!r}; valid: {', '.join(SYSTEMS)}")
    g = _load_graph(cfg["graph"], cfg["visited"])
    rec = _make_recommender(cfg["system"], g, cfg)
    lists = []
    for t in _targets(cfg["targets"], g):
        rl = rec(t)
        lists.append(rl)
    echo = {"rng_seed": cfg["seed"], "strategy": cfg["system"]}
    if cfg["system"] == "ppr":
        echo["damping"] = cfg["damping"]
    atomic_write_text(cfg["out"], write_jsonl(lists, g.keys, **echo))
    atomic_write_text(cfg["out"] + ".manifest.json", dumps({"resolved_config": cfg, "n_lists": len(lists)}))
    empty = sum(1 for rl in lists if rl.flags.get("empty_profile"))
    print(f"wrote {len(lists)} lists to {cfg['out']}" + (f" ({empty} with empty profile)" if empty else ""))
    return EXIT_OK


def cmd_evaluate(cfg: dict) -> int:
    train = _load_graph(cfg["t1"], cfg["t1_visited"], "t1")
    truth = _load_graph(cfg["t2"], cfg["t2_visited"], "t2")
    pair = build_snapshot_pair(train, truth)
    if cfg["runs"]:
        runs = {}
        for part in cfg["runs"].split(","):
            name, _, path = part.partition("=")
            if not path:
                raise UsageError("--runs expects name=path pairs")
            runs[name] = read_jsonl(_read(path))
        report = evaluate_runs(pair, runs, cfg["k"])
    else:
        names = [s for s in cfg["systems"].split(",") if s]
        systems = {SYSTEM_LABELS.get(n, n): _make_recommender(n, train, cfg) for n in names}
        report = run_experiment(pair, systems, cfg["k"])
    out = Path(cfg["out_dir"])
    doc = report.to_dict()
    doc["resolved_config"] = cfg
    atomic_write_text(out / "report.json", dumps(doc))
    atomic_write_text(out / "report.txt", report.to_table())
    atomic_write_text(out / "curve.csv", report.curve_csv())
    sys.stdout.write(report.to_table())
    return EXIT_OK


def _ranked_items(spec: str) -> list:
    if spec.endswith(".jsonl"):
        recs = read_jsonl(_read(spec))
        if len(recs) != 1:
            raise DataError(f"{spec}: expected exactly one ranked list, found {len(recs)}")
        return [e[0] for e in recs[0]["entries"]]
    return [x for x in spec.split(",") if x]


def cmd_interleave(cfg: dict) -> int:
    _require(cfg, "a", "b")
    a, b = _ranked_items(cfg["a"]), _ranked_items(cfg["b"])
    clicks = [x for x in str(cfg["clicks"]).split(",") if x]
    try:
        il = balanced_interleave(a, b, rng=derive_seed(cfg["seed"], "interleave"), display_size=cfg["display_size"])
        att = attribute_clicks(il, a, b, clicks)
    except ValueError as exc:
        raise DataError(str(exc)) from exc
    doc = {"items": list(il.items), "origin": list(il.origin), "first_picker": il.first_picker,
           **att.trace(), "clicks": clicks, "resolved_config": cfg}
    text = dumps(doc)
    if cfg["out"]:
        atomic_write_text(cfg["out"], text)
    print(att.verdict)
    sys.stdout.write(text)
    return EXIT_OK


def render_svg(rows: list[tuple[int, str, float]], title: str, width: int = 640, height: int = 400) -> str:
    """Line chart of p@k per system; deterministic output."""
    systems = list(dict.fromkeys(s for _, s, _ in rows))
    ks = [k for k, _, _ in rows]
    kmin, kmax = min(ks), max(ks)
    ymax = max([v for _, _, v in rows] + [1e-9])
    left, right, top, bottom = 60, 170, 40, 50
    pw, ph = width - left - right, height - top - bottom
    colours = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2"]

    def x(k):
        return left + (k - kmin) / max(kmax - kmin, 1) * pw

    def y(v):
        return top + ph - v / ymax * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
           f'<rect width="{width}" height="{height}" fill="white"/>',
           f'<text x="{width / 2:.1f}" y="22" text-anchor="middle" font-size="14">{title}</text>',
           f'<line x1="{left}" y1="{top + ph}" x2="{left + pw}" y2="{top + ph}" stroke="black"/>',
           f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + ph}" stroke="black"/>',
           f'<text x="{left + pw / 2:.1f}" y="{height - 12}" text-anchor="middle">k</text>',
           f'<text x="16" y="{top + ph / 2:.1f}" text-anchor="middle" '
           f'transform="rotate(-90 16 {top + ph / 2:.1f})">precision</text>']
    for i in range(5):
        v = ymax * i / 4
        out.append(f'<text x="{left - 6}" y="{y(v) + 4:.1f}" text-anchor="end">{v:.3f}</text>')
    for k in sorted({kmin, kmax, *[t for t in (10, 25, 50, 75) if kmin < t < kmax]}):
        out.append(f'<text x="{x(k):.1f}" y="{top + ph + 16}" text-anchor="middle">{k}</text>')
    for i, s in enumerate(systems):
        col = colours[i % len(colours)]
        pts = " ".join(f"{x(k):.2f},{y(v):.2f}" for k, name, v in rows if name == s)
        out.append(f'<polyline fill="none" stroke="{col}" stroke-width="1.5" points="{pts}"/>')
        ly = top + 14 + 18 * i
        out.append(f'<line x1="{left + pw + 12}" y1="{ly - 4}" x2="{left + pw + 32}" y2="{ly - 4}" '
                   f'stroke="{col}" stroke-width="2"/>')
        out.append(f'<text x="{left + pw + 38}" y="{ly}">{s}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def cmd_report(cfg: dict) -> int:
    _require(cfg, "curve")
    reader = csv.DictReader(io.StringIO(_read(cfg["curve"])))
    try:
        rows = [(int(r["k"]), r["system"], float(r["precision"])) for r in reader]
    except (KeyError, ValueError) as exc:
        raise DataError(f"{cfg['curve']}: malformed curve CSV ({exc})") from exc
    if not rows:
        raise DataError(f"{cfg['curve']}: no rows")
    atomic_write_text(cfg["out"], render_svg(rows, cfg["title"]))
    print(f"wrote {cfg['out']}")
    return EXIT_OK


COMMANDS = {
    "synth": cmd_synth,
    "stats": cmd_stats,
    "sample": lambda cfg: _walk_cmd(cfg, "mhrw"),
    "vicinity": lambda cfg: _walk_cmd(cfg, "ego"),
    "recommend": cmd_recommend,
    "evaluate": cmd_evaluate,
    "interleave": cmd_interleave,
    "report": cmd_report,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        ns = vars(parser.parse_args(argv))
        logging.basicConfig(level=logging.INFO if ns.pop("verbose") else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        command = ns.pop("command")
        cfg = resolve_config(command, ns)
        return COMMANDS[command](cfg)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, GraphParseError, InvalidKeyError, MismatchedTargetsError,
            UnfetchableStartError, WalkStuckError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    except Exception as exc:  # noqa: BLE001
        log.exception("runtime failure")
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
