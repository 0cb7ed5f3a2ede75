"""Backend selection for the hot loops.

The compiled extension is used when it imports; otherwise the pure-Python
module takes over. Set ``FEDFOLLOW_PURE_PYTHON=1`` to force the fallback.
"""

from __future__ import annotations

import os

from . import _pykernels

if os.environ.get("FEDFOLLOW_PURE_PYTHON"):
    _impl = _pykernels
else:
    try:
        from . import _ckernels as _impl
    except ImportError:
        _impl = _pykernels

BACKEND: str = _impl.BACKEND

mhrw_walk = _impl.mhrw_walk
ego_walk = _impl.ego_walk
ppr_power = _impl.ppr_power
bm25_accumulate = _impl.bm25_accumulate
triangle_counts = _impl.triangle_counts


def backends() -> dict:
    """All importable backends by name, for comparison tests and benchmarks."""
    found = {"python": _pykernels}
    try:
        from . import _ckernels

        found["cython"] = _ckernels
    except ImportError:
        pass
    return found
