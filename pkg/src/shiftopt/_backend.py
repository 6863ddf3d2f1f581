"""Kernel backend selection.

The compiled extension is used when importable; the numpy fallback
otherwise.  Set ``SHIFTOPT_PURE_PYTHON=1`` to force the fallback.
"""

import os

if os.environ.get("SHIFTOPT_PURE_PYTHON", "") not in ("", "0"):
    from . import _kernels_py as kernels
else:
    try:
        from . import _kernels as kernels  # type: ignore[no-redef]
    except ImportError:
        from . import _kernels_py as kernels

BACKEND = kernels.BACKEND_NAME
