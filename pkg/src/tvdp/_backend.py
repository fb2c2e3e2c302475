"""Select the water-fill kernel backend at import time.

The compiled extension is preferred when present; the pure-Python twin is the
fallback. ``TVDP_BACKEND`` overrides:

    auto (default)  compiled if importable, else python
    compiled        require tvdp._kernels, raise if missing
    python          force the pure twin
"""

import os

from . import _kernels_py

_requested = os.environ.get("TVDP_BACKEND", "auto").strip().lower()

if _requested in ("", "auto"):
    try:
        from . import _kernels as _impl
    except ImportError:
        _impl = _kernels_py
elif _requested in ("compiled", "c", "ext"):
    from . import _kernels as _impl
elif _requested in ("python", "py", "pure"):
    _impl = _kernels_py
else:
    raise ValueError(
        f"TVDP_BACKEND={_requested!r} not understood (use auto, compiled, or python)"
    )

waterfill = _impl.waterfill
BACKEND_NAME = _impl.BACKEND_NAME


def backend_name():
    """Name of the active kernel backend: 'compiled' or 'python'."""
    return BACKEND_NAME
