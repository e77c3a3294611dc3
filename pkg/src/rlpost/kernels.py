"""Kernel backend selection.

The compiled ``_kernels`` extension is used when importable; otherwise (or
when ``RLPOST_PURE_PYTHON=1``) the numpy fallback in ``_kernels_py`` is used.
Both expose the same four functions.
"""
import os

from . import _kernels_py as fallback

BACKEND = "python"
_impl = fallback

if os.environ.get("RLPOST_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as compiled
    except ImportError:  # extension not built
        compiled = None
    else:
        _impl = compiled
        BACKEND = "compiled"
else:
    compiled = None

gru_recurrence = _impl.gru_recurrence
gru_recurrence_backward = _impl.gru_recurrence_backward
median_filter_binary = _impl.median_filter_binary
decode_runs = _impl.decode_runs


def backends():
    """Mapping of available backend name -> module, for tests and benchmarks."""
    out = {"python": fallback}
    if compiled is not None:
        out["compiled"] = compiled
    else:
        try:
            from . import _kernels
        except ImportError:
            pass
        else:
            out["compiled"] = _kernels
    return out
