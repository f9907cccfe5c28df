"""Kernel dispatch: compiled extension when available, NumPy otherwise.

Set ``MONOSCAT_PURE_PYTHON=1`` to force the fallback. ``MONOSCAT_THREADS``
caps the worker threads used for the per-pixel loop. Each pixel is computed
independently with single-threaded BLAS, so results do not depend on the
thread count.
"""

import logging
import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from threadpoolctl import threadpool_limits

from . import _kernels_py

log = logging.getLogger(__name__)

_impl = _kernels_py
BACKEND = "python"
if os.environ.get("MONOSCAT_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled
    except ImportError:  # pragma: no cover - depends on build
        log.debug("compiled kernels unavailable, using NumPy fallback")
    else:
        _impl = _compiled
        BACKEND = "compiled"


def thread_count() -> int:
    raw = os.environ.get("MONOSCAT_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            raise ValueError(f"MONOSCAT_THREADS must be an integer, got {raw!r}") from None
    return os.cpu_count() or 1


def backend_module(name=None):
    """Return the kernel module for ``name`` ('compiled', 'python' or None=active)."""
    if name is None:
        return _impl
    if name == "python":
        return _kernels_py
    if name == "compiled":
        from . import _kernels
        return _kernels
    raise ValueError(f"unknown kernel backend {name!r}")


def winding_numbers(curve, points, backend=None):
    curve = np.ascontiguousarray(curve, dtype=float)
    points = np.ascontiguousarray(points, dtype=float).reshape(-1, 2)
    return backend_module(backend).winding_numbers(curve, points)


def pixel_eig_counts(base, coef, kdirs, centers, delta, backend=None, threads=None):
    """Per-pixel counts of eigenvalues of ``base - coef v_j v_j^*`` below -delta / above delta."""
    impl = backend_module(backend)
    base = np.asarray(base, dtype=complex)
    kdirs = np.ascontiguousarray(kdirs, dtype=float)
    centers = np.ascontiguousarray(centers, dtype=float).reshape(-1, 2)
    threads = thread_count() if threads is None else threads
    J = len(centers)
    with threadpool_limits(limits=1):
        if threads <= 1 or J < 64:
            return impl.pixel_eig_counts(base, float(coef), kdirs, centers, float(delta))
        bounds = np.linspace(0, J, min(threads, J) + 1).astype(int)
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(
                lambda ab: impl.pixel_eig_counts(base, float(coef), kdirs,
                                                 centers[ab[0]:ab[1]], float(delta)),
                zip(bounds[:-1], bounds[1:])))
    return (np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts]))
