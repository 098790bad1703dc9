"""Kernel selection: compiled extension when available, NumPy otherwise.

Set ``QNISIM_PURE_PYTHON=1`` to force the fallback (used by the kernel
benchmark and parity tests).  Within one installation the selected kernel
is fixed, so repeated runs stay bit-identical.
"""

from __future__ import annotations

import os

if os.environ.get("QNISIM_PURE_PYTHON", "0") not in ("", "0"):
    from . import _kernels_py as _impl
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]
    except ImportError:
        from . import _kernels_py as _impl

COMPILED: bool = _impl.COMPILED
fwm_step = _impl.fwm_step
