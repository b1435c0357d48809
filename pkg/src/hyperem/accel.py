"""Backend selection for the hot numeric kernels.

Two interchangeable implementations exist for the inner loops that dominate
runtime (2-D convolution forward/backward and LUT nearest-row search):

    - a numba @njit path (default when numba imports cleanly), and
    - a pure-numpy path.

Set HYPEREM_NO_NUMBA=1 to force the numpy path. The choice is made once at
import time; benchmarks/bench_backends.py times both sides directly.
"""

from __future__ import annotations

import os


def _want_numba() -> bool:
    if os.environ.get("HYPEREM_NO_NUMBA", "").strip().lower() in ("1", "true", "yes"):
        return False
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


NUMBA_ENABLED = _want_numba()

if NUMBA_ENABLED:
    from ._kernels_numba import (conv2d_forward_raw, conv2d_backward_raw,
                                 lut_nearest_raw)
else:
    from ._kernels_numpy import (conv2d_forward_raw, conv2d_backward_raw,
                                 lut_nearest_raw)

__all__ = ["NUMBA_ENABLED", "conv2d_forward_raw", "conv2d_backward_raw",
           "lut_nearest_raw"]
