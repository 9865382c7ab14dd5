"""Kernel backend selection.

The compiled extension ``_ckernels`` is used when it was built; otherwise, or
when the environment variable ``OPSYNTH_PURE_PYTHON`` is set to a non-empty
value other than ``0``, the NumPy versions in ``_pykernels`` are used.
"""

import os

from . import _pykernels as python

try:
    from . import _ckernels as compiled
except ImportError:  # extension not built
    compiled = None

_force_python = os.environ.get("OPSYNTH_PURE_PYTHON", "") not in ("", "0")

if compiled is not None and not _force_python:
    BACKEND = "cython"
    _impl = compiled
else:
    BACKEND = "python"
    _impl = python

apply_pair = _impl.apply_pair
event_distribution = _impl.event_distribution
