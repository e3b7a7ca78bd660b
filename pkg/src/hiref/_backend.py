"""Kernel selection: compiled extension when importable, numpy otherwise.

Set ``HIREF_PURE_PYTHON=1`` to force the numpy kernels.  Matrix scaling
uses the compiled loop only for narrow matrices: past about 16 columns the
vectorized ``exp`` in numpy outruns the scalar one.
"""

import os

from . import _fallback

try:
    if os.environ.get("HIREF_PURE_PYTHON"):
        raise ImportError("pure-Python kernels requested")
    from . import _kernels as _impl

    COMPILED = True
except ImportError:
    _impl = _fallback
    COMPILED = False

NARROW_COLUMNS = 16


def sinkhorn_rect(log_k, a, b, v, tol, max_iter):
    """Dispatch log-domain matrix scaling by width; see ``_kernels.sinkhorn_rect``."""
    impl = _impl if log_k.shape[1] <= NARROW_COLUMNS else _fallback
    return impl.sinkhorn_rect(log_k, a, b, v, tol, max_iter)


lsap = _impl.lsap
greedy_capacity = _impl.greedy_capacity

__all__ = ["COMPILED", "sinkhorn_rect", "lsap", "greedy_capacity"]
