"""Hot loops used by the oracle and the separators.

The compiled extension ``pdstsp._kernels`` is used when it was built;
otherwise the numpy fallback in ``pdstsp._kernels_py`` is selected. Set
``PDSTSP_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _kernels_py

BACKEND = "python"

if os.environ.get("PDSTSP_PURE_PYTHON", "") != "1":
    try:
        from . import _kernels as _impl

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _kernels_py
else:
    _impl = _kernels_py

held_karp_table = _impl.held_karp_table
stoer_wagner = _impl.stoer_wagner
greedy_matching = _impl.greedy_matching
bfs_components = _impl.bfs_components

__all__ = [
    "BACKEND",
    "held_karp_table",
    "stoer_wagner",
    "greedy_matching",
    "bfs_components",
]
