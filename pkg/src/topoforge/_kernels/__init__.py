"""Kernel backend selection.

The compiled Cython extension (``_ext``) is preferred when it was built;
otherwise the pure NumPy implementations are used. Set the environment
variable ``TOPOFORGE_PURE_PYTHON=1`` to force the pure backend (used by
the backend-equivalence tests and the benchmark).
"""
import os

if os.environ.get("TOPOFORGE_PURE_PYTHON"):
    from . import pure as _impl
else:
    try:
        from . import _ext as _impl  # type: ignore[attr-defined]
    except ImportError:
        from . import pure as _impl

BACKEND = _impl.BACKEND_NAME
elem_energies = _impl.elem_energies
pcg = _impl.pcg
filter_apply = _impl.filter_apply


def get_backend(name: str):
    """Return a specific backend module by name ('pure' or 'compiled')."""
    if name == "pure":
        from . import pure
        return pure
    if name == "compiled":
        from . import _ext  # raises ImportError when not built
        return _ext
    raise ValueError(f"unknown kernel backend: {name!r}")
