"""Kernel backend selection.

The dense MLP kernels exist twice: a Cython extension (``_fastops``) and a
numpy fallback (``_pyops``). The extension wins when importable; set
``MADPL_LAB_BACKEND=py`` or ``=c`` to force one side. ``benchmarks/`` has a
script comparing the two.
"""

import os

from . import _pyops

try:
    from . import _fastops
except ImportError:  # pragma: no cover - depends on the build environment
    _fastops = None


def _select():
    forced = os.environ.get("MADPL_LAB_BACKEND", "auto").lower()
    if forced in ("py", "python"):
        return _pyops
    if forced in ("c", "cython", "fast"):
        if _fastops is None:
            raise ImportError(
                "MADPL_LAB_BACKEND=c but the compiled madpl_lab._fastops "
                "extension is not available"
            )
        return _fastops
    if forced != "auto":
        raise ValueError(f"unknown MADPL_LAB_BACKEND value: {forced!r}")
    return _fastops if _fastops is not None else _pyops


ops = _select()


def backend_name():
    """Short tag of the active kernel backend ('c' or 'python')."""
    return ops.NAME
