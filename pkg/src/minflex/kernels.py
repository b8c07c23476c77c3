"""Kernel backend selection.

The compiled extension is used when it imports; set ``MINFLEX_PURE_PYTHON=1``
to force the fallback.  ``BACKEND`` names the active implementation.
"""
import os

from . import _pykernels

if os.environ.get("MINFLEX_PURE_PYTHON"):
    _ck = None
else:
    try:
        from . import _ckernels as _ck
    except ImportError:
        _ck = None

if _ck is not None:
    dykstra_halfspaces = _ck.dykstra_halfspaces
    BACKEND = "cython"
else:
    dykstra_halfspaces = _pykernels.dykstra_halfspaces
    BACKEND = "python"

BACKENDS = {"python": _pykernels.dykstra_halfspaces}
if _ck is not None:
    BACKENDS["cython"] = _ck.dykstra_halfspaces


def thread_count():
    """Worker cap from ``MINFLEX_THREADS`` (default: 1)."""
    try:
        return max(1, int(os.environ.get("MINFLEX_THREADS", "1")))
    except ValueError:
        return 1
