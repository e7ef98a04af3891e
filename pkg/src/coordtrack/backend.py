"""Kernel backend selection.

The compiled extension is preferred when importable; the pure-numpy fallback is
used otherwise.  ``COORD_SIM_BACKEND=python|compiled`` forces a choice (forcing
``compiled`` fails loudly when the extension is missing).
"""

from __future__ import annotations

import os

from . import _kernels_py

try:
    from . import _corekern
except ImportError:  # extension not built
    _corekern = None

_forced = os.environ.get("COORD_SIM_BACKEND")
if _forced == "python":
    _impl = _kernels_py
elif _forced == "compiled":
    if _corekern is None:
        raise ImportError("COORD_SIM_BACKEND=compiled but coordtrack._corekern is not built")
    _impl = _corekern
elif _forced is None:
    _impl = _corekern if _corekern is not None else _kernels_py
else:
    raise ValueError(f"COORD_SIM_BACKEND must be 'python' or 'compiled', got {_forced!r}")

BACKEND_NAME = _impl.BACKEND_NAME
PUSH_WEIGHT_FLOOR = _kernels_py.PUSH_WEIGHT_FLOOR
HAS_COMPILED = _corekern is not None

mix = _impl.mix
sync_coord_step = _impl.sync_coord_step
indep_coord_step = _impl.indep_coord_step
run_sync_coord = _impl.run_sync_coord
run_indep_coord = _impl.run_indep_coord


def get_backend(name):
    """Explicit backend module lookup (used by the benchmark and parity tests)."""
    if name == "python":
        return _kernels_py
    if name == "compiled":
        if _corekern is None:
            raise ImportError("compiled backend not available")
        return _corekern
    raise ValueError(f"unknown backend {name!r}")
