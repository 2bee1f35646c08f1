"""Selection between the numba-compiled kernels and the pure-numpy fallbacks.

The compiled path is used whenever numba imports cleanly, unless the
environment variable ``LLECOMB_DISABLE_NUMBA`` is set to a truthy value
(``1``, ``true``, ``yes``, ``on``).  The flag is read once, at import time.
"""

from __future__ import annotations

import os

ENV_FLAG = "LLECOMB_DISABLE_NUMBA"

try:  # pragma: no cover - exercised implicitly
    import numba
except ImportError:  # pragma: no cover
    numba = None

NUMBA_AVAILABLE = numba is not None


def _disabled_by_env() -> bool:
    return os.environ.get(ENV_FLAG, "").strip().lower() in {"1", "true", "yes", "on"}


USE_NUMBA = NUMBA_AVAILABLE and not _disabled_by_env()


def backend_name() -> str:
    return "numba" if USE_NUMBA else "numpy"
