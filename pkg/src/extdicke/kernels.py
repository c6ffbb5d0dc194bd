"""Kernel selection.

The compiled extension is used when it imports; otherwise, or when
``EXTDICKE_PURE_PYTHON`` is set to a non-empty value, the numpy versions are.
"""

import os

from . import _pykernels

BACKEND = "python"
if not os.environ.get("EXTDICKE_PURE_PYTHON"):
    try:
        from . import _ckernels as _impl

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _pykernels
else:
    _impl = _pykernels

symv_lower = _impl.symv_lower
displacement_overlaps = _impl.displacement_overlaps
