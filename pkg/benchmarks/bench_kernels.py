"""Time the compiled kernels against the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--repeat 3]
"""

import argparse
import time

import numpy as np

from fedfollow import kernels
from fedfollow.cf import ProfileIndex
from fedfollow.sampler import WalkConfig
from fedfollow.synth import SynthConfig, generate


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def workloads(g):
    indptr, indices = g.undirected
    start = int(np.argmax(np.diff(indptr)))
    pick, accept = WalkConfig(200_000, rng_seed=1).draws()
    move, pick2 = WalkConfig(200_000, rng_seed=2).draws()
    idx = ProfileIndex.build(g, "combined")
    query = np.asarray(sorted(set(indices[indptr[start]:indptr[start + 1]].tolist())), dtype=np.int64)
    return {
        "mhrw_walk 200k steps": lambda k: k.mhrw_walk(indptr, indices, start, pick, accept),
        "ego_walk 200k steps": lambda k: k.ego_walk(indptr, indices, start, 0.8, move, pick2),
        "ppr_power to 1e-10": lambda k: k.ppr_power(g.out_indptr, g.out_indices, start, 0.85, 1e-10, 1000),
        "bm25 one query x 50": lambda k: [k.bm25_accumulate(idx.term_indptr, idx.post_docs, idx.post_tf, query,
                                                             idx.idf, idx.norm, idx.k1, idx.doc_count)
                                          for _ in range(50)],
        "triangle_counts": lambda k: k.triangle_counts(indptr, indices),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--n", type=int, default=5000)
    args = ap.parse_args()
    g = generate(SynthConfig(n=args.n, seed=0, changed_users=0)).t1
    backends = kernels.backends()
    print(f"graph: {g.node_count} nodes, {g.edge_count} edges; backends: {', '.join(sorted(backends))}")
    names = sorted(backends)
    print(f"{'kernel':<24}" + "".join(f"{n:>12}" for n in names) + ("    speedup" if len(names) == 2 else ""))
    for label, fn in workloads(g).items():
        t = {n: best_of(lambda: fn(backends[n]), args.repeat) for n in names}
        row = f"{label:<24}" + "".join(f"{t[n]:>11.4f}s" for n in names)
        if len(names) == 2:
            row += f"  {t['python'] / t['cython']:>8.1f}x"
        print(row)


if __name__ == "__main__":
    main()
