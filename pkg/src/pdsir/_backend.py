"""Kernel backend selection.

The hot loops of the sampler exist twice: as numba-compiled scalar loops
(:mod:`pdsir._nb`) and as vectorised numpy code (:mod:`pdsir._np`). Both
consume the random stream in the same order, so a given seed produces the
same chain on either backend up to last-bit floating point differences.

Set ``PDSIR_BACKEND=numpy`` to force the numpy path. The default is
``numba`` when it can be imported.
"""

import os

try:
    import numba

    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    NUMBA_AVAILABLE = False

_requested = os.environ.get("PDSIR_BACKEND", "numba").strip().lower()
if _requested not in ("numba", "numpy"):
    raise ImportError(f"PDSIR_BACKEND must be 'numba' or 'numpy', got {_requested!r}")

BACKEND = "numba" if (_requested == "numba" and NUMBA_AVAILABLE) else "numpy"


def njit(fn):
    """Compile ``fn`` in nopython mode when numba is importable."""
    if not NUMBA_AVAILABLE:
        return fn
    return numba.njit(cache=True, nogil=True)(fn)


def kernels(name=None):
    """Return the kernel module for ``name`` (defaults to the active backend)."""
    name = BACKEND if name is None else name
    if name == "numba":
        if not NUMBA_AVAILABLE:
            raise RuntimeError("numba backend requested but numba is not installed")
        from pdsir import _nb

        return _nb
    if name == "numpy":
        from pdsir import _np

        return _np
    raise ValueError(f"unknown backend {name!r}")
