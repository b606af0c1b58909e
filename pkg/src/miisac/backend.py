"""Kernel backend selection.

The compiled extension (``miisac._kernels``) is used when it imported
cleanly; otherwise the pure-numpy twin takes over.  ``MI_ISAC_BACKEND``
overrides the choice: ``compiled`` (error if unavailable), ``python``,
or ``auto`` (default).
"""

from __future__ import annotations

import os

from . import _kernels_py


def _select():
    choice = os.environ.get("MI_ISAC_BACKEND", "auto").strip().lower()
    if choice not in ("auto", "compiled", "python"):
        raise ValueError(f"MI_ISAC_BACKEND must be auto/compiled/python, got {choice!r}")
    if choice == "python":
        return _kernels_py
    try:
        from . import _kernels  # compiled extension, optional at build time
        return _kernels
    except ImportError:
        if choice == "compiled":
            raise ImportError(
                "MI_ISAC_BACKEND=compiled but the miisac._kernels extension is not built"
            ) from None
        return _kernels_py


_impl = _select()

BACKEND_NAME: str = _impl.BACKEND_NAME
channel_real = _impl.channel_real
gn_refine = _impl.gn_refine


def available_backends() -> list[str]:
    names = ["python"]
    try:
        from . import _kernels  # noqa: F401
        names.insert(0, "compiled")
    except ImportError:
        pass
    return names
