"""Backend selection for the hot stepping kernels.

Prefers the compiled Cython extension; falls back to the NumPy implementation
when the extension is missing or ROUGHSPDE_FORCE_SLOW=1 is set. Both expose
the same API: heat_chain, wave_chain, FemStepper. Results are reproducible
bit-for-bit under a fixed backend.
"""

from __future__ import annotations

import os

from . import _slowkern

if os.environ.get("ROUGHSPDE_FORCE_SLOW", "") == "1":
    _impl = _slowkern
else:
    try:
        from . import _fastkern as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _slowkern

BACKEND: str = _impl.BACKEND
heat_chain = _impl.heat_chain
wave_chain = _impl.wave_chain
FemStepper = _impl.FemStepper
