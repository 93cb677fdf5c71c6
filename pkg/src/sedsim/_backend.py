"""Kernel backend selection.

The compiled extension is preferred when importable; the NumPy fallback is
a term-for-term twin, so results are bit-identical either way.  Set
SEDSIM_FORCE_PYTHON=1 to skip the extension without reinstalling.
"""

from __future__ import annotations

import os

from . import _kernels_py

_FORCED = os.environ.get("SEDSIM_FORCE_PYTHON", "") not in ("", "0")

if _FORCED:
    _compiled = None
else:
    try:
        from . import _kernels as _compiled
    except ImportError:
        _compiled = None

COMPILED_AVAILABLE = _compiled is not None


def get_kernels(name: str | None = None):
    """Kernel module for `name` in {None/'auto', 'compiled', 'python'}."""
    if name in (None, "auto"):
        return _compiled if _compiled is not None else _kernels_py
    if name == "python":
        return _kernels_py
    if name == "compiled":
        if _compiled is None:
            raise RuntimeError("compiled kernels are not available in this install")
        return _compiled
    raise ValueError(f"unknown backend {name!r}")


def backend_name() -> str:
    """Name of the backend auto-selection resolves to."""
    return get_kernels().BACKEND_NAME
