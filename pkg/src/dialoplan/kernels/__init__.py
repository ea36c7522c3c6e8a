"""Policy-math kernels with a compiled fast path.

The compiled extension is preferred when it imported cleanly; the
pure-Python module is the fallback and the reference semantics. Set
``DIALOPLAN_PURE_KERNELS=1`` to force the fallback (used by the benchmark
and the cross-backend equivalence tests). Both backends are bit-identical,
so which one is active never changes planner output.
"""

from __future__ import annotations

import os

from . import pure as _pure

_impl = _pure
_BACKEND = "pure-python"

if os.environ.get("DIALOPLAN_PURE_KERNELS", "") not in ("1", "true", "yes"):
    try:
        from . import _native as _native_impl

        _impl = _native_impl
        _BACKEND = "native"
    except ImportError:
        pass

softmax = _impl.softmax
sample_index = _impl.sample_index
adapt_weights = _impl.adapt_weights


def backend_name() -> str:
    """Which kernel backend was selected at import time."""
    return _BACKEND
