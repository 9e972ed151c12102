"""Element kernels: compiled extension when available, numpy otherwise.

Set ``NAVSLIP_PURE_PYTHON=1`` to force the numpy implementation.
"""

import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if os.environ.get("NAVSLIP_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _impl  # noqa: F811
        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py

local_mass = _impl.local_mass
local_gradgrad = _impl.local_gradgrad
local_symgrad = _impl.local_symgrad
local_div = _impl.local_div
local_convection = _impl.local_convection

__all__ = ["BACKEND", "local_mass", "local_gradgrad", "local_symgrad", "local_div",
           "local_convection"]
