"""Kernel backend selection: compiled extension when available, NumPy otherwise.

Set ``BLEPROX_KERNEL=python`` or ``=cython`` to force a backend (the latter
raises if the extension was not built). Both backends are bitwise-identical,
so trained models and predictions do not depend on the choice.
"""

from __future__ import annotations

import os

from . import _split_py

_forced = os.environ.get("BLEPROX_KERNEL", "").strip().lower()

if _forced == "python":
    _impl = _split_py
    BACKEND = "python"
elif _forced == "cython":
    from . import _split_cy as _impl  # ImportError here means the ext is missing

    BACKEND = "cython"
else:
    try:
        from . import _split_cy as _impl

        BACKEND = "cython"
    except ImportError:
        _impl = _split_py
        BACKEND = "python"

best_split_scan = _impl.best_split_scan
apply_tree = _impl.apply_tree
NO_SPLIT = _split_py.NO_SPLIT
