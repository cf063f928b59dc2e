"""Backend selection for the hot kernels.

The compiled extension ``fkquasi._kernels`` is used when it imports; otherwise
the numpy implementations in ``fkquasi._fallback`` are used. Setting the
environment variable ``FKQUASI_PURE_PYTHON=1`` forces the fallback.
"""
import os

from . import _fallback

try:
    if os.environ.get("FKQUASI_PURE_PYTHON", "") not in ("", "0"):
        raise ImportError("pure python requested")
    from . import _kernels as _compiled
except ImportError:
    _compiled = None

_BACKENDS = {"python": _fallback}
if _compiled is not None:
    _BACKENDS["cython"] = _compiled

BACKEND = "cython" if _compiled is not None else "python"
_active = _BACKENDS[BACKEND]


def available():
    """Names of the importable backends."""
    return sorted(_BACKENDS)


def set_backend(name):
    """Switch the active backend; returns the previous name."""
    global _active, BACKEND
    if name not in _BACKENDS:
        raise ValueError(f"backend {name!r} not available (have {available()})")
    previous = BACKEND
    BACKEND = name
    _active = _BACKENDS[name]
    return previous


def get_backend(name=None):
    return _BACKENDS[name] if name is not None else _active


def bump_field(*args):
    return _active.bump_field(*args)


def pair_forces(*args):
    return _active.pair_forces(*args)
