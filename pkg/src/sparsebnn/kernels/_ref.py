"""Numpy reference implementation of the batched network kernels.

This is the import-time fallback when the compiled extension is missing;
it is also the ground truth the compiled kernels are tested against.
"""

from __future__ import annotations

import numpy as np

NAME = "numpy"

ACT_TANH = 0
ACT_SIGMOID = 1
ACT_RELU = 2


def _activate(z: np.ndarray, act: int) -> np.ndarray:
    if act == ACT_TANH:
        return np.tanh(z)
    if act == ACT_SIGMOID:
        return 1.0 / (1.0 + np.exp(-z))
    if act == ACT_RELU:
        return np.maximum(z, 0.0)
    raise ValueError(f"unknown activation code {act}")


def batch_forward(values: np.ndarray, sizes: tuple[int, ...], act: int,
                  x: np.ndarray) -> np.ndarray:
    """Evaluate ``n`` parameter vectors over ``m`` scalar inputs.

    ``values`` has shape (n, n_params) with the canonical per-layer packing
    (weights row-major, then biases).  Returns shape (n, m).
    """
    values = np.ascontiguousarray(values, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64).ravel()
    n = values.shape[0]
    m = x.size
    if sizes[0] != 1 or sizes[-1] != 1:
        raise ValueError("batched forward expects scalar input/output layers")

    h = np.broadcast_to(x, (n, 1, m))
    offset = 0
    n_layers = len(sizes) - 1
    for layer in range(n_layers):
        fan_in, fan_out = sizes[layer], sizes[layer + 1]
        w = values[:, offset:offset + fan_out * fan_in]
        w = w.reshape(n, fan_out, fan_in)
        offset += fan_out * fan_in
        b = values[:, offset:offset + fan_out]
        offset += fan_out
        z = np.einsum("noi,nim->nom", w, h) + b[:, :, None]
        h = _activate(z, act) if layer < n_layers - 1 else z
    return h[:, 0, :]


def batch_log_likelihood(values: np.ndarray, sizes: tuple[int, ...], act: int,
                         x: np.ndarray, y: np.ndarray,
                         noise_var: float) -> np.ndarray:
    """Gaussian i.i.d. log-likelihood of each parameter vector. Shape (n,)."""
    y = np.asarray(y, dtype=np.float64).ravel()
    pred = batch_forward(values, sizes, act, x)
    resid = pred - y[None, :]
    const = 0.5 * y.size * np.log(2.0 * np.pi * noise_var)
    return -0.5 * np.einsum("ij,ij->i", resid, resid) / noise_var - const
