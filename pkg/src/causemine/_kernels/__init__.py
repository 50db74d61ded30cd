"""Numeric kernels for the two sequential hot loops.

``var1_recurrence`` drives the telemetry simulator and ``run_walks`` the
root-cause random walk. A compiled Cython implementation is preferred when
the extension built; otherwise the pure NumPy fallback is used. Both
backends consume caller-supplied random numbers in the same order, so
results are identical regardless of which one is active.
"""

from __future__ import annotations

from . import _pykernels

try:
    from . import _ckernels  # type: ignore[attr-defined]

    _impl = _ckernels
    BACKEND = "cython"
except ImportError:  # extension not built; pure Python fallback
    _impl = _pykernels
    BACKEND = "python"

var1_recurrence = _impl.var1_recurrence
run_walks = _impl.run_walks


def available_backends() -> dict[str, object]:
    """Name -> module for every importable backend (used by the benchmark)."""
    backends: dict[str, object] = {"python": _pykernels}
    if BACKEND == "cython":
        backends["cython"] = _impl
    return backends
