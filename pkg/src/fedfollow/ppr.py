"""Personalized PageRank recommendations from a seed user.

The walk follows out-edges (follow direction). With probability ``damping``
it moves along a uniformly chosen out-edge; otherwise it restarts at the
seed. Nodes without out-edges send all of their mass back to the seed, so
nodes unreachable from the seed score exactly zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .cf import followees
from .graph import DirectedGraph
from .ranking import RankedList, top_k


@dataclass(frozen=True)
class PprConfig:
    damping: float = 0.85
    tolerance: float = 1e-10
    max_iterations: int = 1000
    undirected: bool = False

    def __post_init__(self):
        if not 0.0 < self.damping < 1.0:
            raise ValueError("damping must be in (0, 1)")
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


@dataclass(frozen=True)
class PprVector:
    scores: np.ndarray
    seed: int
    iterations_used: int
    converged: bool
    max_mass_error: float = 0.0


def _adjacency(g: DirectedGraph, undirected: bool) -> tuple[np.ndarray, np.ndarray]:
    return g.undirected if undirected else (g.out_indptr, g.out_indices)


def ppr_power_iteration(g: DirectedGraph, seed: int, cfg: PprConfig = PprConfig()) -> PprVector:
    """Iterate r <- damping * W^T r + (1 - damping) e_seed from r = e_seed.

    Stops when the L1 change drops below ``cfg.tolerance``.
    ``max_mass_error`` is the worst |sum(r) - 1| seen over all iterates.
    """
    if not 0 <= seed < g.node_count:
        raise IndexError(f"seed {seed} outside [0, {g.node_count})")
    indptr, indices = _adjacency(g, cfg.undirected)
    r, iters, converged, mass_err = kernels.ppr_power(
        indptr, indices, int(seed), cfg.damping, cfg.tolerance, cfg.max_iterations
    )
    return PprVector(np.asarray(r), int(seed), int(iters), bool(converged), float(mass_err))


def transition_matrix(g: DirectedGraph, seed: int, undirected: bool = False) -> np.ndarray:
    """Dense row-stochastic matrix with dangling rows pointing at the seed."""
    n = g.node_count
    indptr, indices = _adjacency(g, undirected)
    m = np.zeros((n, n))
    for u in range(n):
        nbrs = indices[indptr[u]:indptr[u + 1]]
        if len(nbrs):
            m[u, nbrs] = 1.0 / len(nbrs)
        else:
            m[u, seed] = 1.0
    return m


def _gauss_solve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = a.astype(float).copy()
    x = b.astype(float).copy()
    n = len(x)
    for col in range(n):
        piv = col + int(np.argmax(np.abs(a[col:, col])))
        if abs(a[piv, col]) < 1e-300:
            raise ArithmeticError("singular system")
        if piv != col:
            a[[col, piv]] = a[[piv, col]]
            x[[col, piv]] = x[[piv, col]]
        for row in range(col + 1, n):
            f = a[row, col] / a[col, col]
            if f != 0.0:
                a[row, col:] -= f * a[col, col:]
                x[row] -= f * x[col]
    for col in range(n - 1, -1, -1):
        x[col] = (x[col] - a[col, col + 1:] @ x[col + 1:]) / a[col, col]
    return x


def ppr_dense_oracle(g: DirectedGraph, seed: int, damping: float = 0.85, undirected: bool = False) -> PprVector:
    """Direct solve of (I - damping * M^T) r = (1 - damping) e_seed; small graphs only."""
    n = g.node_count
    if n > 50:
        raise ValueError("dense oracle is limited to 50 nodes")
    m = transition_matrix(g, seed, undirected)
    rhs = np.zeros(n)
    rhs[seed] = 1.0 - damping
    r = _gauss_solve(np.eye(n) - damping * m.T, rhs)
    return PprVector(r, seed, 0, True)


def recommend_ppr(g_train: DirectedGraph, target: int, k: int = 100, cfg: PprConfig = PprConfig(),
                  filter_followees: bool = True) -> RankedList:
    vec = ppr_power_iteration(g_train, target, cfg)
    exclude = {target} | (followees(g_train, target) if filter_followees else set())
    entries = top_k(np.arange(g_train.node_count), vec.scores, k, exclude)
    flags = {} if vec.converged else {"not_converged": True, "iterations": vec.iterations_used}
    return RankedList(target, entries, k, "ppr", flags)
