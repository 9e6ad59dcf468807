"""Backend selection for the hot loops.

The compiled extension is used when it imports; otherwise (or when
``EIGENSR_PURE_PYTHON=1``) the numpy implementations take over. Both expose
``apply_weights``, ``stitch_mean`` and ``min_shift_hamming``.
"""
import os

from . import _pykernels

python_backend = _pykernels
compiled_backend = None

if os.environ.get("EIGENSR_PURE_PYTHON", "") != "1":
    try:
        from . import _ckernels as compiled_backend
    except ImportError:  # extension not built
        compiled_backend = None

_active = compiled_backend if compiled_backend is not None else python_backend
BACKEND = "cython" if _active is compiled_backend else "python"

apply_weights = _active.apply_weights
stitch_mean = _active.stitch_mean
min_shift_hamming = _active.min_shift_hamming
