"""Hot-loop kernels with a compiled core and a numpy fallback.

The batched network forward pass / Gaussian log-likelihood dominates the
runtime of the samplers, so it has a Cython implementation.  Selection
happens once at import: the compiled module is used when present unless
``SPARSEBNN_NO_COMPILED`` is set in the environment.  Both backends share
the exact same signatures; ``benchmarks/bench_kernels.py`` compares them.
"""

from __future__ import annotations

import os

from . import _ref

try:  # compiled extension is optional
    from . import _core  # type: ignore[attr-defined]
    _HAVE_COMPILED = True
except ImportError:
    _core = None
    _HAVE_COMPILED = False

ACT_TANH = _ref.ACT_TANH
ACT_SIGMOID = _ref.ACT_SIGMOID
ACT_RELU = _ref.ACT_RELU

if _HAVE_COMPILED and not os.environ.get("SPARSEBNN_NO_COMPILED"):
    _active = _core
else:
    _active = _ref


def backend_name() -> str:
    """Name of the backend selected at import ('compiled' or 'numpy')."""
    return _active.NAME


def available_backends() -> dict[str, object]:
    out = {_ref.NAME: _ref}
    if _HAVE_COMPILED:
        out[_core.NAME] = _core
    return out


def batch_forward(values, sizes, act, x):
    return _active.batch_forward(values, sizes, act, x)


def batch_log_likelihood(values, sizes, act, x, y, noise_var):
    return _active.batch_log_likelihood(values, sizes, act, x, y, noise_var)
