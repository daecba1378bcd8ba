"""Kernel backend selection.

Hot numeric kernels exist twice: numba-jitted (default) and pure numpy.
``UNIEMBED_BACKEND`` picks one at import time:

  auto   -- numba if it imports, else numpy (default)
  numba  -- require the jitted kernels
  numpy  -- force the pure-numpy fallback

Both backends expose the same function names; see ``benchmarks/bench_kernels.py``
for a side-by-side timing comparison.
"""

import os

from .errors import ConfigError


def _select():
    mode = os.environ.get("UNIEMBED_BACKEND", "auto").strip().lower()
    if mode not in ("auto", "numba", "numpy"):
        raise ConfigError(
            f"UNIEMBED_BACKEND must be auto, numba, or numpy (got {mode!r})"
        )
    if mode == "numpy":
        from . import _kernels_numpy as impl

        return impl, "numpy"
    try:
        from . import _kernels_numba as impl

        return impl, "numba"
    except ImportError:
        if mode == "numba":
            raise
        from . import _kernels_numpy as impl

        return impl, "numpy"


kernels, BACKEND_NAME = _select()


def backend_name() -> str:
    """Name of the kernel backend active in this process."""
    return BACKEND_NAME
