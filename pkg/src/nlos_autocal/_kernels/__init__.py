"""Kernel backend selection.

The hot triple sums (scan x voxel x bin) live either in the Cython extension
``_core`` or in the pure-numpy fallback ``_numpy_impl``. The compiled backend
is picked automatically when the extension built; override with the
``NLOS_AUTOCAL_BACKEND`` environment variable (``auto``/``compiled``/``numpy``)
or per call via the ``backend=`` keyword the public operations expose.

Both backends implement the same chunk-level functions; ``benchmarks/`` has a
script comparing them head to head.
"""

from __future__ import annotations

import os

from ..errors import BackendUnavailableError
from . import _numpy_impl

try:
    from . import _core
except ImportError:
    _core = None


def available_backends() -> list[str]:
    names = ["numpy"]
    if _core is not None:
        names.insert(0, "compiled")
    return names


def get_backend(name: str | None = None):
    """Resolve a backend module by name (``None`` -> env var -> auto)."""
    if name is None:
        name = os.environ.get("NLOS_AUTOCAL_BACKEND", "auto")
    if name in ("auto", ""):
        return _core if _core is not None else _numpy_impl
    if name == "numpy":
        return _numpy_impl
    if name == "compiled":
        if _core is None:
            raise BackendUnavailableError(
                "compiled kernel extension is not built; reinstall with a C toolchain "
                "or use NLOS_AUTOCAL_BACKEND=numpy"
            )
        return _core
    raise BackendUnavailableError(f"unknown backend {name!r} (use auto/compiled/numpy)")


def split_chunks(n: int, workers: int) -> list[tuple[int, int]]:
    """Deterministic near-even partition of range(n) into at most ``workers``
    contiguous [start, stop) chunks."""
    workers = max(1, min(int(workers), n)) if n > 0 else 1
    bounds = [round(i * n / workers) for i in range(workers + 1)]
    return [(bounds[i], bounds[i + 1]) for i in range(workers) if bounds[i + 1] > bounds[i]]
