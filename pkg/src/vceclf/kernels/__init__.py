"""Hot numeric kernels with a numba path and a pure-numpy fallback.

The backend is chosen once at import time from ``VCECLF_BACKEND``
(``numba`` or ``numpy``). Without the variable, numba is used when it can be
imported. Both backends are importable side by side as ``kernels.numpy_impl``
and ``kernels.numba_impl`` (the latter is ``None`` without numba).
"""

from __future__ import annotations

import os

from . import _numpy as numpy_impl

try:
    from . import _numba as numba_impl
except ImportError:  # numba missing or broken
    numba_impl = None

_requested = os.environ.get("VCECLF_BACKEND", "").strip().lower()
if _requested not in ("", "numba", "numpy"):
    raise ImportError(f"VCECLF_BACKEND must be 'numba' or 'numpy', got {_requested!r}")
if _requested == "numba" and numba_impl is None:
    raise ImportError("VCECLF_BACKEND=numba but numba is not importable")

if _requested == "numpy" or numba_impl is None:
    BACKEND = "numpy"
    _impl = numpy_impl
else:
    BACKEND = "numba"
    _impl = numba_impl

resize_bilinear = _impl.resize_bilinear
warp_homography = _impl.warp_homography
hue_shift = _impl.hue_shift
color_jitter = _impl.color_jitter
blur_separable = _impl.blur_separable
dense_forward = _impl.dense_forward

__all__ = [
    "BACKEND",
    "blur_separable",
    "color_jitter",
    "dense_forward",
    "hue_shift",
    "numba_impl",
    "numpy_impl",
    "resize_bilinear",
    "warp_homography",
]
