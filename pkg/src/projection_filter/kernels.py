"""Hot-loop kernels, compiled when available.

The Cython extension ``_core`` is used if it was built; otherwise, or when the
environment variable ``PROJECTION_FILTER_PURE_PYTHON`` is set to a non-empty
value other than ``0``, the numpy versions in ``_fallback`` are used. Both
expose the same functions. Summation order differs between them, so results
agree to rounding but not bit-for-bit across backends.
"""
import os

import numpy as np

from . import _fallback

_forced = os.environ.get("PROJECTION_FILTER_PURE_PYTHON", "") not in ("", "0")

try:
    if _forced:
        raise ImportError
    from . import _core as _impl

    BACKEND = "cython"
except ImportError:
    _impl = _fallback
    BACKEND = "numpy"

BACKENDS = {"numpy": _fallback}
if BACKEND == "cython":
    BACKENDS["cython"] = _impl


def get_backend(name=None):
    if name is None:
        return _impl
    try:
        return BACKENDS[name]
    except KeyError:
        raise ValueError(f"backend {name!r} unavailable; have {sorted(BACKENDS)}") from None


def lse_dual2(stats, log_base, theta, q, signs=None, backend=None):
    impl = get_backend(backend)
    log_base = np.ascontiguousarray(log_base, dtype=float)
    signs = np.ones_like(log_base) if signs is None else np.ascontiguousarray(signs, dtype=float)
    return impl.lse_dual2(
        np.ascontiguousarray(stats, dtype=float),
        log_base,
        signs,
        np.ascontiguousarray(theta, dtype=float),
        int(q),
    )


def systematic_resample(weights, u, backend=None):
    return get_backend(backend).systematic_resample(np.ascontiguousarray(weights, dtype=float), float(u))


def fp_step_1d(p, drift, alpha, dx, dt, reflecting=False, backend=None):
    return get_backend(backend).fp_step_1d(
        np.ascontiguousarray(p, dtype=float),
        np.ascontiguousarray(drift, dtype=float),
        np.ascontiguousarray(alpha, dtype=float),
        float(dx),
        float(dt),
        bool(reflecting),
    )
