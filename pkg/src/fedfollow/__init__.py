"""Who-to-follow recommendation for federated, directed follow graphs."""

from .cf import ProfileIndex, bm25_score, build_profiles, recommend_cf, recommend_random
from .evaluation import (
    SnapshotPair,
    attribute_clicks,
    average_precision,
    balanced_interleave,
    build_snapshot_pair,
    paired_t_test,
    precision_at,
    run_experiment,
    success_at,
)
from .federation import (
    CacheStore,
    FederationClient,
    PolitenessPolicy,
    RateLimiter,
    SimulatedProvider,
    UserRecord,
    VirtualClock,
)
from .graph import DirectedGraph, compute_stats, degree, diff_edges, load_edge_list
from .kernels import BACKEND
from .ppr import PprConfig, ppr_dense_oracle, ppr_power_iteration, recommend_ppr
from .ranking import RankedList
from .sampler import WalkConfig, ego_walk, mhrw_sample, mhrw_step

__version__ = "0.1.0"
