"""Hot-loop kernels with a compiled backend and a numpy fallback.

The compiled extension is used when it imports cleanly; set
``MISR_REFKIT_PURE=1`` to force the numpy implementation.
"""
import os

from . import _pykernels

BACKEND = "python"
_impl = _pykernels

if os.environ.get("MISR_REFKIT_PURE", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl  # noqa: F811

        BACKEND = "cython"
    except ImportError:
        _impl = _pykernels

translate = _impl.translate
ic_sums = _impl.ic_sums
splat = _impl.splat
cpsnr_scan = _impl.cpsnr_scan
cubic_weights = _pykernels.cubic_weights


def backends():
    """Return the available kernel modules keyed by backend name."""
    out = {"python": _pykernels}
    try:
        from . import _ckernels

        out["cython"] = _ckernels
    except ImportError:
        pass
    return out


__all__ = ["BACKEND", "translate", "ic_sums", "splat", "cpsnr_scan", "cubic_weights", "backends"]
