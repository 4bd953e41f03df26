"""Kernel backend selection.

The compiled extension is used when importable; set ``CHAINREF_PURE_PYTHON=1``
to force the reference implementation.
"""

from __future__ import annotations

import os

from . import _pykernels

BACKEND = "python"
edit_distance = _pykernels.edit_distance
predicate_score = _pykernels.predicate_score
predicate_scores = _pykernels.predicate_scores

if not os.environ.get("CHAINREF_PURE_PYTHON"):
    try:
        from . import _kernels
    except ImportError:
        _kernels = None
    if _kernels is not None:
        BACKEND = "cython"
        edit_distance = _kernels.edit_distance
        predicate_score = _kernels.predicate_score
        predicate_scores = _kernels.predicate_scores


def backends() -> dict:
    """All importable backends by name, for tests and benchmarks."""
    found = {"python": _pykernels}
    try:
        from . import _kernels as compiled

        found["cython"] = compiled
    except ImportError:
        pass
    return found
