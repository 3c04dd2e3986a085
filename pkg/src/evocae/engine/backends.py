"""Kernel backend registry: numpy im2col+BLAS by default, compiled extension opt-in.

Both backends implement the same three-primitive contract (see
kernels_numpy). benchmarks/bench_backends.py compares them; on the machines
measured so far the BLAS-backed numpy path wins at every layer size, so it is
the default even when the extension built. Set ``EVOCAE_BACKEND=cython`` or
call ``set_backend`` to use the compiled direct-convolution core (lower peak
memory: no patch-matrix temporary).
"""

from __future__ import annotations

import os

from ..errors import ConfigError
from . import kernels_numpy

_BACKENDS = {"numpy": kernels_numpy}

try:
    from . import kernels_cython

    _BACKENDS["cython"] = kernels_cython
except ImportError:
    pass


def available_backends() -> list[str]:
    return sorted(_BACKENDS)


def _initial() -> str:
    requested = os.environ.get("EVOCAE_BACKEND")
    if requested:
        if requested not in _BACKENDS:
            raise ConfigError(
                f"EVOCAE_BACKEND={requested!r} not available; "
                f"choices: {available_backends()}"
            )
        return requested
    return "numpy"


_active = _initial()


def active_backend() -> str:
    return _active


def set_backend(name: str) -> None:
    global _active
    if name not in _BACKENDS:
        raise ConfigError(f"unknown backend {name!r}; choices: {available_backends()}")
    _active = name


def get():
    return _BACKENDS[_active]
