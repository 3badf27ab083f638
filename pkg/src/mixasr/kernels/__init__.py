"""Hot numeric kernels with a numba backend and a pure-numpy fallback.

The backend is chosen once at import time: numba when it is importable
and the environment variable MIXASR_DISABLE_NUMBA is unset/falsy,
otherwise the numpy fallback. ``benchmarks/kernel_bench.py`` times the
two against each other on training-representative shapes.
"""

from __future__ import annotations

import os

from . import _numpy_impl

DISABLE_ENV_VAR = "MIXASR_DISABLE_NUMBA"


def numba_disabled() -> bool:
    return os.environ.get(DISABLE_ENV_VAR, "").strip().lower() in {"1", "true", "yes", "on"}


_numba_impl = None
if not numba_disabled():
    try:
        from . import _numba_impl  # noqa: F811
    except ImportError:
        _numba_impl = None

_impl = _numba_impl if _numba_impl is not None else _numpy_impl

depthwise_conv1d = _impl.depthwise_conv1d
depthwise_conv1d_grad = _impl.depthwise_conv1d_grad
edit_counts = _impl.edit_counts
gelu = _impl.gelu
gelu_grad = _impl.gelu_grad
sigmoid = _impl.sigmoid
sigmoid_grad = _impl.sigmoid_grad
softmax_last = _impl.softmax_last
softmax_last_grad = _impl.softmax_last_grad


def backend() -> str:
    """Name of the active kernel backend ("numba" or "numpy")."""
    return "numba" if _impl is _numba_impl and _numba_impl is not None else "numpy"
