"""Backend selection for the nodewise split-step kernels.

The compiled extension is used when it imports; setting ``DGPE_PURE_PYTHON=1``
forces the NumPy fallback. ``BACKEND`` names the active implementation.
"""

import os

from . import _kernels_py

if os.environ.get("DGPE_PURE_PYTHON", "") == "1":
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl
    except ImportError:
        _impl = _kernels_py

BACKEND = "cython" if _impl is not _kernels_py else "python"

nonlinear_phase = _impl.nonlinear_phase
abs2 = _impl.abs2
mul_real = _impl.mul_real
mul_complex = _impl.mul_complex


def backends():
    """Return every importable backend module keyed by name."""
    out = {"python": _kernels_py}
    try:
        from . import _kernels

        out["cython"] = _kernels
    except ImportError:
        pass
    return out
