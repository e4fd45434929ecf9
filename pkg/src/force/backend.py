"""Evaluation backend selection.

The compiled kernel (force._evalcore, built from Cython) is used when it
imported; otherwise the pure-Python kernel. Set FORCE_EVAL_BACKEND=python or
=compiled to force one (the latter raises when the extension is missing).
"""

from __future__ import annotations

import os

_ENV = "FORCE_EVAL_BACKEND"


def _load():
    choice = os.environ.get(_ENV, "auto")
    if choice not in ("auto", "compiled", "python"):
        raise ValueError(f"{_ENV} must be 'auto', 'compiled' or 'python', got {choice!r}")
    if choice != "python":
        try:
            from . import _evalcore

            return _evalcore, True
        except ImportError:
            if choice == "compiled":
                raise
    from . import _evalpure

    return _evalpure, False


impl, HAVE_COMPILED = _load()


def backend_name() -> str:
    return "compiled" if HAVE_COMPILED else "python"
