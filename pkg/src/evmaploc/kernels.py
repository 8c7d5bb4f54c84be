"""Hot-loop kernels with a compiled core and a pure-Python fallback.

The compiled extension is used when it imports; set ``EVMAPLOC_PURE_PYTHON=1``
to force the fallback. Both backends expose the same functions and must
agree bit-for-bit on TSTS and z-buffer output.
"""
import os

import numpy as np

from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

_BACKENDS = {"python": _pykernels}
if _ckernels is not None:
    _BACKENDS["cython"] = _ckernels

if os.getenv("EVMAPLOC_PURE_PYTHON") == "1" or _ckernels is None:
    BACKEND = "python"
else:
    BACKEND = "cython"


def available_backends():
    return sorted(_BACKENDS)


def _impl(backend):
    name = backend or BACKEND
    try:
        return _BACKENDS[name]
    except KeyError:
        raise ValueError(f"kernel backend {name!r} not available (have {available_backends()})") from None


def tsts(t, x, y, p, width, height, R, alpha, r, beta, use_center_ref=False, sticky_mask=False, backend=None):
    """Run the TSTS event loop. Returns ``(raw_surface HxWx2, mask HxW, keep per event)``."""
    return _impl(backend).tsts(
        np.ascontiguousarray(t, dtype=np.int64),
        np.ascontiguousarray(x, dtype=np.int32),
        np.ascontiguousarray(y, dtype=np.int32),
        np.ascontiguousarray(p, dtype=np.uint8),
        int(width), int(height), int(R), float(alpha), int(r), float(beta),
        bool(use_center_ref), bool(sticky_mask),
    )


def zbuffer(pix, z, idx, n_pixels, backend=None):
    """Nearest-depth-wins scatter; equal depths go to the lowest point index."""
    return _impl(backend).zbuffer(
        np.ascontiguousarray(pix, dtype=np.int64),
        np.ascontiguousarray(z, dtype=np.float64),
        np.ascontiguousarray(idx, dtype=np.int64),
        int(n_pixels),
    )


def ncc_search(src, dst, qx, qy, init_dx, init_dy, patch_r, search_r, backend=None):
    """Zero-mean NCC block search around ``(qx+init_dx, qy+init_dy)``.

    Returns ``(dx, dy, best_score, second_peak)``; the second peak is the best
    score at least two pixels (Chebyshev) from the winner. Queries whose
    source patch leaves the image or is flat get ``best_score = -inf``.
    """
    return _impl(backend).ncc_search(
        np.ascontiguousarray(src, dtype=np.float64),
        np.ascontiguousarray(dst, dtype=np.float64),
        np.ascontiguousarray(qx, dtype=np.int64),
        np.ascontiguousarray(qy, dtype=np.int64),
        np.ascontiguousarray(init_dx, dtype=np.int64),
        np.ascontiguousarray(init_dy, dtype=np.int64),
        int(patch_r), int(search_r),
    )
