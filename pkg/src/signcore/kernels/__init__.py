"""Hot loop kernels with a numba backend and a pure-numpy fallback.

The backend is chosen once at import time.  Set ``SIGNCORE_NUMBA=0`` to force
the numpy path; it is also used when numba cannot be imported.  Both backends
share signatures and are tested against each other.
"""
import os

from . import _numpy

BACKEND = "numpy"
_impl = _numpy

if os.environ.get("SIGNCORE_NUMBA", "1").strip().lower() not in ("0", "false", "no", "off"):
    try:
        from . import _numba

        _impl = _numba
        BACKEND = "numba"
    except ImportError:  # pragma: no cover - depends on environment
        pass

im2col = _impl.im2col
col2im = _impl.col2im
maxpool_forward = _impl.maxpool_forward
maxpool_backward = _impl.maxpool_backward
warp_bilinear = _impl.warp_bilinear
smo_solve = _impl.smo_solve

__all__ = [
    "BACKEND",
    "im2col",
    "col2im",
    "maxpool_forward",
    "maxpool_backward",
    "warp_bilinear",
    "smo_solve",
]
