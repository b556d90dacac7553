"""Kernel dispatch: compiled extension when available, numpy fallback otherwise.

Set ``COMMPD_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _kernels_py

if os.environ.get("COMMPD_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl
    except ImportError:
        _impl = _kernels_py

BACKEND = "cython" if _impl is not _kernels_py else "python"

GRIM = _kernels_py.GRIM
ALWAYS_DEFECT = _kernels_py.ALWAYS_DEFECT
TIT_FOR_TAT = _kernels_py.TIT_FOR_TAT

mwu_exact_counts = _impl.mwu_exact_counts
nearest_centroid = _impl.nearest_centroid
play_supergame = _impl.play_supergame
