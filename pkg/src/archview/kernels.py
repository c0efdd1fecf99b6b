"""Kernel selection: the compiled ``_speedups`` extension when it imports,
otherwise the numpy/pure-Python ``_pykernels``.

Set ``ARCHVIEW_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _pykernels

if os.environ.get("ARCHVIEW_PURE_PYTHON", "").lower() in ("1", "true", "yes"):
    _impl = _pykernels
else:
    try:
        from . import _speedups as _impl
    except ImportError:
        _impl = _pykernels

BACKEND = "python" if _impl is _pykernels else "compiled"
MAX_EDGES = _impl.MAX_EDGES

prepare_rules = _impl.prepare_rules
first_match = _impl.first_match
reach_mass = _impl.reach_mass


def available_backends():
    """Map backend name to module, for tests and benchmarks comparing both."""
    out = {"python": _pykernels}
    try:
        from . import _speedups

        out["compiled"] = _speedups
    except ImportError:
        pass
    return out
