"""Backend dispatch for the trajectory kernels.

Two interchangeable implementations exist: a numba-compiled one in
:mod:`lamperti._kernels_numba` and a vectorized numpy one in
:mod:`lamperti._kernels_numpy`. Both walk the same per-replica counter RNG
(see :mod:`lamperti._rng`) and produce bit-identical trajectories, so the
choice is purely about speed. Selection order:

* ``LAMPERTI_NUMBA=0`` (or ``false``/``no``/``off``) forces the numpy path;
* ``LAMPERTI_NUMBA=1`` requires numba and fails loudly if it is missing;
* unset: numba when importable, numpy otherwise.

Replica status codes shared by every kernel: RUN means the replica still
has work, DONE that it finished its op, NEED_EXTEND that it stepped past
the jump table and waits for the driver to rebuild a larger one, FAILED
that it reached a state below the table base (a driver bug, not a model
outcome).
"""

from __future__ import annotations

import os

RUN = 0
DONE = 1
NEED_EXTEND = 2
FAILED = 3

_TRUTHY = {"1", "true", "yes", "on"}
_FALSY = {"0", "false", "no", "off"}

_numba_module = None
_numpy_module = None


def numba_requested() -> bool | None:
    """Tri-state read of LAMPERTI_NUMBA: True, False, or None when unset."""
    raw = os.environ.get("LAMPERTI_NUMBA")
    if raw is None:
        return None
    val = raw.strip().lower()
    if val in _TRUTHY:
        return True
    if val in _FALSY:
        return False
    raise ValueError(f"LAMPERTI_NUMBA={raw!r} is neither truthy nor falsy")


def _load_numpy_backend():
    global _numpy_module
    if _numpy_module is None:
        from . import _kernels_numpy

        _numpy_module = _kernels_numpy
    return _numpy_module


def _load_numba_backend():
    global _numba_module
    if _numba_module is None:
        from . import _kernels_numba

        _numba_module = _kernels_numba
    return _numba_module


def get_backend(name: str | None = None):
    """Resolve a kernel backend module by name or by environment."""
    if name in (None, "auto"):
        pref = numba_requested()
        if pref is False:
            return _load_numpy_backend()
        if pref is True:
            return _load_numba_backend()
        try:
            return _load_numba_backend()
        except ImportError:
            return _load_numpy_backend()
    if name == "numpy":
        return _load_numpy_backend()
    if name == "numba":
        return _load_numba_backend()
    raise ValueError(f"unknown backend {name!r}")


def backend_name(module) -> str:
    return "numba" if module.__name__.endswith("_numba") else "numpy"
