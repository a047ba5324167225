"""Hot geometry kernels with a compiled core and a numpy fallback.

The compiled extension (``sensorium._kernels._core``) is used when it was
built; otherwise the pure-numpy twin in ``pure`` takes over with identical
semantics. Set ENGINE_PURE_PYTHON=1 to force the fallback (used by the
parity tests and the benchmark).
"""
import os

from . import pure
from .pure import (  # noqa: F401  (packing helpers are backend-independent)
    BURIED_DEPTH,
    PRIM_COLS,
    TYPE_BOX,
    TYPE_CAPSULE,
    TYPE_PLANE,
    TYPE_SPHERE,
    pack_box,
    pack_capsule,
    pack_plane,
    pack_sphere,
)

_forced_pure = os.environ.get("ENGINE_PURE_PYTHON", "") not in ("", "0")

if not _forced_pure:
    try:
        from . import _core as _impl
        BACKEND = "compiled"
    except ImportError:
        _impl = pure
        BACKEND = "pure"
else:
    _impl = pure
    BACKEND = "pure"

raycast = _impl.raycast
line_depth = _impl.line_depth


def backend_name() -> str:
    return BACKEND
