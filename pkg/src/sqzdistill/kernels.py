"""Hot-loop kernels, compiled when available.

The Cython extension ``_kernels`` is used if it imports; otherwise the numpy
versions in ``_fallback`` are used. Setting ``SQZDISTILL_PURE_PYTHON=1``
forces the fallback. ``BACKEND`` names the active implementation.
"""

import os

from . import _fallback

if os.environ.get("SQZDISTILL_PURE_PYTHON", "") not in ("", "0"):
    _impl = _fallback
else:
    try:
        from . import _kernels as _impl
    except ImportError:  # extension not built
        _impl = _fallback

BACKEND = "cython" if _impl is not _fallback else "python"

bs_table = _impl.bs_table
gaussify_contract = _impl.gaussify_contract
husimi_batch = _impl.husimi_batch

__all__ = ["BACKEND", "bs_table", "gaussify_contract", "husimi_batch"]
