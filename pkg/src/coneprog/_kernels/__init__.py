"""Kernel selection: compiled extension when built, numpy fallback otherwise.

``CONEPROG_KERNEL`` in the environment ("compiled" or "python") overrides
the automatic choice; an explicit kernel name passed to the solver settings
overrides both.
"""

import os

from . import fallback

try:
    from . import _core

    HAVE_COMPILED = True
except ImportError:  # pragma: no cover - depends on the build
    _core = None
    HAVE_COMPILED = False

__all__ = ["HAVE_COMPILED", "get_kernel"]


def get_kernel(name="auto"):
    """Resolve a kernel choice to ``(callable, resolved_name)``."""
    if name == "auto":
        name = os.environ.get("CONEPROG_KERNEL", "").strip() or (
            "compiled" if HAVE_COMPILED else "python"
        )
    if name == "compiled":
        if not HAVE_COMPILED:
            raise ValueError("the compiled kernel is not available in this build")
        return _core.admm_span, "compiled"
    if name == "python":
        return fallback.admm_span, "python"
    raise ValueError(f"unknown kernel {name!r} (use 'auto', 'compiled' or 'python')")
