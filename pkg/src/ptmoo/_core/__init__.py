"""Hot numerical kernels, compiled when available.

The Cython extension ``_ckernels`` is imported if it was built; otherwise the
NumPy implementations in ``_pure`` are used. Set ``PTMOO_PURE=1`` in the
environment to force the fallback.
"""
import os

from . import _pure

BACKEND = "python"
if os.environ.get("PTMOO_PURE", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl
        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _pure
else:
    _impl = _pure

cross_cov = _impl.cross_cov
lml_grad_terms = _impl.lml_grad_terms
nondominated_ranks = _impl.nondominated_ranks

__all__ = ["BACKEND", "cross_cov", "lml_grad_terms", "nondominated_ranks"]
