"""Hot-kernel dispatch: compiled extension when available, numpy fallback otherwise.

The compiled module is optional; set ``COBAR_PURE_PYTHON=1`` to force the
fallback even when the extension is installed.  ``BACKEND`` names the
implementation selected at import time.
"""

from __future__ import annotations

import importlib
import os

from . import _python

_accel = None
if not os.environ.get("COBAR_PURE_PYTHON"):
    try:
        _accel = importlib.import_module("cobar.kernels._accel")
    except ImportError:
        _accel = None

_active = _accel if _accel is not None else _python
BACKEND: str = "cython" if _accel is not None else "python"

ward_linkage = _active.ward_linkage
mf_sgd_epoch = _active.mf_sgd_epoch


def available_backends() -> dict:
    """Importable kernel modules keyed by backend name."""
    backends = {"python": _python}
    if _accel is not None:
        backends["cython"] = _accel
    return backends
