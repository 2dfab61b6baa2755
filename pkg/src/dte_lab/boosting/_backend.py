"""Kernel backend selection.

The compiled extension is used when importable, the numpy fallback
otherwise. DTE_LAB_BACKEND=numpy|cython forces a choice; forcing cython
without the built extension raises at import.
"""
import os

from . import _kernels_np

_requested = os.environ.get("DTE_LAB_BACKEND", "").strip().lower()

if _requested == "numpy":
    kernels = _kernels_np
elif _requested == "cython":
    from . import _kernels_cy as kernels
elif _requested == "":
    try:
        from . import _kernels_cy as kernels  # type: ignore[no-redef]
    except ImportError:
        kernels = _kernels_np
else:
    raise ImportError(
        f"DTE_LAB_BACKEND={_requested!r} not recognized; use 'numpy' or 'cython'"
    )


def backend_name() -> str:
    return "cython" if kernels.__name__.endswith("_cy") else "numpy"
