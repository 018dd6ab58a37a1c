"""Kernel backend selection: the compiled extension when importable, else pure Python.

Set ``QGRAPH_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _pykernels

if os.environ.get("QGRAPH_PURE_PYTHON", "") not in ("", "0"):
    _impl = _pykernels
else:
    try:
        from . import _kernels as _impl
    except ImportError:  # extension not built
        _impl = _pykernels

BACKEND = _impl.BACKEND
primitive_orbits = _impl.primitive_orbits
is_lyndon = _impl.is_lyndon

__all__ = ["BACKEND", "primitive_orbits", "is_lyndon"]
