"""Integrator kernel selection.

The compiled ``_rk`` extension is used when it was built; otherwise (or when
``PERAVG_PURE_PYTHON`` is set) the numpy implementation in ``_rk_py`` is.
``BACKEND`` records which one is active.
"""
import os

from . import _rk_py

if os.environ.get("PERAVG_PURE_PYTHON"):
    _impl = _rk_py
else:
    try:
        from . import _rk as _impl
    except ImportError:
        _impl = _rk_py

BACKEND = "compiled" if _impl is not _rk_py else "python"

dopri5 = _impl.dopri5
fixed_rk5 = _impl.fixed_rk5
hermite = _impl.hermite


def backends():
    """Return ``{name: module}`` for every importable kernel implementation."""
    out = {"python": _rk_py}
    try:
        from . import _rk

        out["compiled"] = _rk
    except ImportError:
        pass
    return out
