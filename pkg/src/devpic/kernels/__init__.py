"""Hot-kernel backend selection.

The compiled Cython extension is used when present; the numpy reference
implementation otherwise. Set DEVPIC_DISABLE_EXT=1 to force the fallback
(used by the parity tests and the benchmark).
"""

from __future__ import annotations

import os

from . import _numpy_impl

if os.environ.get("DEVPIC_DISABLE_EXT", "0") == "1":
    _impl = _numpy_impl
else:
    try:
        from . import _cy_impl as _impl  # type: ignore[attr-defined]
    except ImportError:
        _impl = _numpy_impl

BACKEND = _impl.BACKEND
scatter_pairs = _impl.scatter_pairs
deposit_ngp = _impl.deposit_ngp
poly_probe_max = _impl.poly_probe_max
cell_index = _impl.cell_index
cell_moments = _impl.cell_moments
kick_drift = _impl.kick_drift

__all__ = ["BACKEND", "scatter_pairs", "deposit_ngp", "poly_probe_max",
           "cell_index", "cell_moments", "kick_drift", "_numpy_impl"]
