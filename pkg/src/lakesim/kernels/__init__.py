"""Grid hot loops with a compiled core and a numpy fallback.

The Cython extension is picked at import time when available; set
``LAKESIM_PURE_PYTHON=1`` to force the numpy implementation (used by the
benchmark to compare both).
"""

import os

from . import _stencil_py

if os.environ.get("LAKESIM_PURE_PYTHON") == "1":
    _impl = _stencil_py
    backend = "python"
else:
    try:
        from . import _stencil as _impl  # type: ignore[attr-defined]

        backend = "cython"
    except ImportError:
        _impl = _stencil_py
        backend = "python"

apply_five_point = _impl.apply_five_point
upwind_divergence = _impl.upwind_divergence

__all__ = ["apply_five_point", "upwind_divergence", "backend"]
