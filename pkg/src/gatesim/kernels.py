"""Kernel backend selection.

The compiled extension is used when it was built; otherwise, or when
``GATESIM_PURE=1`` is set, the pure-Python twin is used. Both produce
identical results.
"""
from __future__ import annotations

import os

from . import _pykernels
from ._pykernels import (  # noqa: F401
    COMPUTE,
    INVOKE,
    NEVER,
    PROBE_AFTER_END,
    PROBE_AT_OFFSET,
    PROBE_NONE,
)

_compiled = None
if not os.environ.get("GATESIM_PURE"):
    try:
        from . import _ckernels as _compiled
    except ImportError:
        _compiled = None

BACKEND = "cython" if _compiled is not None else "python"
simulate_trials = (_compiled or _pykernels).simulate_trials
python_simulate_trials = _pykernels.simulate_trials
compiled_simulate_trials = _compiled.simulate_trials if _compiled is not None else None
