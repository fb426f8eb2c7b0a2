"""Hot kernels, compiled when available.

The Cython extension ``_ext`` is used if it was built; otherwise the
pure-Python module ``_pure`` is used. Setting ``SIMULPOLICY_PURE_PYTHON=1``
forces the fallback. ``IMPLEMENTATION`` names whichever was selected.
"""

import os

from . import _pure

if os.environ.get("SIMULPOLICY_PURE_PYTHON", "") not in ("", "0"):
    _impl = _pure
else:
    try:
        from . import _ext as _impl
    except ImportError:
        _impl = _pure

IMPLEMENTATION = "cython" if _impl is not _pure else "python"

lcp_length = _impl.lcp_length
stretch_linear = _impl.stretch_linear
prefix_beam_search = _impl.prefix_beam_search
log_add = _pure.log_add

__all__ = ["IMPLEMENTATION", "lcp_length", "stretch_linear", "prefix_beam_search", "log_add"]
