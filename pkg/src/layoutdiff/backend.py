"""Sampling kernel selection: compiled extension with numpy fallback.

The compiled kernel is picked automatically when importable. Set
LAYOUTDIFF_BACKEND=numpy (or =compiled) to force one; forcing the compiled
backend when it is missing raises at selection time.
"""
import os

from . import _kernel_np

try:
    from . import _kernel
    HAVE_COMPILED = True
except ImportError:  # extension not built
    _kernel = None
    HAVE_COMPILED = False

ENV_VAR = "LAYOUTDIFF_BACKEND"


def available_backends():
    return ("compiled", "numpy") if HAVE_COMPILED else ("numpy",)


def select_backend(name=None):
    """Resolve a backend module from an explicit name or the environment."""
    if name is None:
        name = os.environ.get(ENV_VAR, "").strip() or None
    if name is None:
        return _kernel if HAVE_COMPILED else _kernel_np
    if name == "numpy":
        return _kernel_np
    if name == "compiled":
        if not HAVE_COMPILED:
            raise RuntimeError("compiled kernel requested but the extension "
                               "is not built (pip install -e . --no-build-isolation)")
        return _kernel
    raise ValueError(f"unknown backend '{name}' (expected 'compiled' or 'numpy')")


def active_backend_name(name=None) -> str:
    return select_backend(name).BACKEND_NAME
