"""Kernel backend selection.

The compiled extension is used when it was built and imports cleanly;
otherwise the numpy implementation takes over.  Setting
``MOEBXII_PURE_PYTHON=1`` forces the fallback (used by the benchmark and
by the cross-backend tests).
"""
import os

from . import _kernels_py

kernels = _kernels_py
compiled = None

try:
    from . import _kernels as compiled
except ImportError:  # extension not built
    compiled = None

if compiled is not None and os.environ.get("MOEBXII_PURE_PYTHON", "") not in ("1", "true", "yes"):
    kernels = compiled

BACKEND = kernels.BACKEND
