"""Backend selection for the BFS kernels.

The compiled extension is used when importable. Setting the environment
variable ``ISLTOPO_PURE_PYTHON=1`` forces the pure-Python implementation.
"""
import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if os.environ.get("ISLTOPO_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled
    except ImportError:
        pass
    else:
        _impl = _compiled
        BACKEND = "cython"

bfs_distances = _impl.bfs_distances
eccentricities = _impl.eccentricities
all_pairs_hops = _impl.all_pairs_hops


def implementations():
    """All importable backends, keyed by name (used by tests and benchmarks)."""
    impls = {"python": _kernels_py}
    try:
        from . import _kernels as compiled
    except ImportError:
        return impls
    impls["cython"] = compiled
    return impls
