"""Hot numeric kernels, dispatched to numba or numpy at import time.

Both implementations stay importable as ``kernels.numpy_impl`` and
``kernels.numba_impl`` (the latter is ``None`` without numba) so they can be
compared directly; the module-level names point at the active backend.
"""

from __future__ import annotations

from .._backend import NUMBA_AVAILABLE, USE_NUMBA, backend_name
from . import _numpy as numpy_impl

if NUMBA_AVAILABLE:
    from . import _numba as numba_impl
else:  # pragma: no cover
    numba_impl = None

_active = numba_impl if USE_NUMBA else numpy_impl

hat_branch_values = _active.hat_branch_values
bisect_brackets = _active.bisect_brackets
cosine_product_matrix = _active.cosine_product_matrix
kerr_rotate = _active.kerr_rotate
strang_run = _active.strang_run

__all__ = [
    "backend_name",
    "bisect_brackets",
    "cosine_product_matrix",
    "hat_branch_values",
    "kerr_rotate",
    "numba_impl",
    "numpy_impl",
    "strang_run",
]
