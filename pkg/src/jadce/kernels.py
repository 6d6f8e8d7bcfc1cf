"""Kernel backend selection.

The compiled extension is preferred when importable; the numpy fallback is
always available.  ``JADCE_FORCE_PY_KERNELS=1`` in the environment forces
the fallback, and :func:`set_backend` switches at runtime (used by the
backend benchmark and the cross-backend tests).
"""

import os

from . import _kernels_py
from .errors import ConfigError

_BACKENDS = {"python": _kernels_py}
try:
    from . import _kernels_cy

    _BACKENDS["compiled"] = _kernels_cy
except ImportError:
    pass

if os.environ.get("JADCE_FORCE_PY_KERNELS"):
    _active = _BACKENDS["python"]
else:
    _active = _BACKENDS.get("compiled", _BACKENDS["python"])


def available_backends():
    return sorted(_BACKENDS)


def backend_name():
    for name, mod in _BACKENDS.items():
        if mod is _active:
            return name
    raise AssertionError("active kernel backend not registered")


def set_backend(name):
    global _active
    if name not in _BACKENDS:
        raise ConfigError(f"unknown kernel backend {name!r}; available: {available_backends()}")
    _active = _BACKENDS[name]


def prox_step_dual(z, at_lam, inv_rho, kappa, xi):
    return _active.prox_step_dual(z, at_lam, inv_rho, kappa, xi)


def prox_step_point(p, kappa, x_prev, xi):
    return _active.prox_step_point(p, kappa, x_prev, xi)


def block_norms(x, out):
    return _active.block_norms(x, out)
