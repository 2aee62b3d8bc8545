"""Shallow feed-forward network model and its Gaussian likelihood.

Parameters live in a single flat vector with a canonical layout: for each
layer ``l = 1..L`` the weights ``W^[l]_{ji}`` (row-major over ``j``, then
``i``) followed by the biases ``b^[l]_j``.  Names follow the
``W^[1]_{11}`` / ``b^[2]_1`` convention used throughout reports and
artifacts, so every scalar in the vector is addressable by a stable name.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels

ACTIVATIONS = {
    "tanh": kernels.ACT_TANH,
    "sigmoid": kernels.ACT_SIGMOID,
    "relu": kernels.ACT_RELU,
}


def _act_value(z: np.ndarray, name: str) -> np.ndarray:
    if name == "tanh":
        return np.tanh(z)
    if name == "sigmoid":
        return 1.0 / (1.0 + np.exp(-z))
    return np.maximum(z, 0.0)


def _act_deriv(z: np.ndarray, name: str) -> np.ndarray:
    """Derivative of the activation at pre-activation ``z``.

    The relu subgradient at exactly 0 is defined as 0.
    """
    if name == "tanh":
        t = np.tanh(z)
        return 1.0 - t * t
    if name == "sigmoid":
        s = 1.0 / (1.0 + np.exp(-z))
        return s * (1.0 - s)
    return (z > 0.0).astype(np.float64)


@dataclass(frozen=True)
class NetworkSpec:
    """Architecture: layer sizes plus the hidden-layer activation."""

    layer_sizes: tuple[int, ...]
    activation: str = "tanh"

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.layer_sizes)
        object.__setattr__(self, "layer_sizes", sizes)
        if len(sizes) < 2:
            raise ValueError("need at least an input and an output layer")
        if any(s < 1 for s in sizes):
            raise ValueError("all layer sizes must be >= 1")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")

    @property
    def n_params(self) -> int:
        sizes = self.layer_sizes
        return sum(sizes[l] * sizes[l - 1] + sizes[l] for l in range(1, len(sizes)))

    @property
    def act_code(self) -> int:
        return ACTIVATIONS[self.activation]


@dataclass(frozen=True)
class ParamEntry:
    name: str
    layer: int
    kind: str                 # "weight" | "bias"
    index: tuple[int, ...]    # (j, i) for weights, (j,) for biases


def _weight_name(layer: int, j: int, i: int) -> str:
    sub = f"{j}{i}" if j <= 9 and i <= 9 else f"{j},{i}"
    return f"W^[{layer}]_{{{sub}}}"


def _bias_name(layer: int, j: int) -> str:
    return f"b^[{layer}]_{j}"


@dataclass(frozen=True)
class ParamLayout:
    """Stable bijection between flat indices and named parameters."""

    entries: tuple[ParamEntry, ...]
    _pos: dict = field(repr=False, hash=False, compare=False, default_factory=dict)

    def __post_init__(self):
        pos = {e.name: k for k, e in enumerate(self.entries)}
        if len(pos) != len(self.entries):
            raise ValueError("duplicate parameter names in layout")
        object.__setattr__(self, "_pos", pos)

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def names(self) -> list[str]:
        return [e.name for e in self.entries]

    def index_of(self, name: str) -> int:
        try:
            return self._pos[name]
        except KeyError:
            raise KeyError(f"unknown parameter name {name!r}") from None


def layout_for(spec: NetworkSpec) -> ParamLayout:
    entries = []
    sizes = spec.layer_sizes
    for layer in range(1, len(sizes)):
        fan_in, fan_out = sizes[layer - 1], sizes[layer]
        for j in range(1, fan_out + 1):
            for i in range(1, fan_in + 1):
                entries.append(ParamEntry(_weight_name(layer, j, i), layer,
                                          "weight", (j, i)))
        for j in range(1, fan_out + 1):
            entries.append(ParamEntry(_bias_name(layer, j), layer, "bias", (j,)))
    return ParamLayout(tuple(entries))


@dataclass
class ParamVector:
    """Flat parameter vector tied to a layout."""

    values: np.ndarray
    layout: ParamLayout

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64).ravel()
        if self.values.size != len(self.layout):
            raise ValueError(
                f"value vector of length {self.values.size} does not match "
                f"layout of length {len(self.layout)}")

    @classmethod
    def zeros(cls, spec: NetworkSpec) -> "ParamVector":
        return cls(np.zeros(spec.n_params), layout_for(spec))

    @classmethod
    def from_named(cls, spec: NetworkSpec, named: dict[str, float]) -> "ParamVector":
        pv = cls.zeros(spec)
        for name, value in named.items():
            pv[name] = value
        return pv

    def __getitem__(self, name: str) -> float:
        return float(self.values[self.layout.index_of(name)])

    def __setitem__(self, name: str, value: float) -> None:
        self.values[self.layout.index_of(name)] = value

    def to_named(self) -> dict[str, float]:
        return {e.name: float(v) for e, v in zip(self.layout.entries, self.values)}

    def copy(self) -> "ParamVector":
        return ParamVector(self.values.copy(), self.layout)


def unflatten(spec: NetworkSpec, values: np.ndarray):
    """Split a flat vector into per-layer ``(W, b)`` pairs."""
    values = np.asarray(values, dtype=np.float64).ravel()
    if values.size != spec.n_params:
        raise ValueError("parameter vector does not match the architecture")
    sizes = spec.layer_sizes
    out, offset = [], 0
    for layer in range(1, len(sizes)):
        fan_in, fan_out = sizes[layer - 1], sizes[layer]
        w = values[offset:offset + fan_out * fan_in].reshape(fan_out, fan_in)
        offset += fan_out * fan_in
        b = values[offset:offset + fan_out]
        offset += fan_out
        out.append((w, b))
    return out


def flatten(spec: NetworkSpec, per_layer) -> np.ndarray:
    parts = []
    for w, b in per_layer:
        parts.append(np.asarray(w, dtype=np.float64).ravel())
        parts.append(np.asarray(b, dtype=np.float64).ravel())
    values = np.concatenate(parts)
    if values.size != spec.n_params:
        raise ValueError("per-layer shapes do not match the architecture")
    return values


def forward(spec: NetworkSpec, params: ParamVector | np.ndarray, x: float) -> float:
    """Scalar forward pass: affine maps with element-wise hidden activations."""
    values = params.values if isinstance(params, ParamVector) else params
    out = forward_many(spec, values, np.array([float(x)]))
    return float(out[0])


def forward_many(spec: NetworkSpec, values: np.ndarray, x: np.ndarray) -> np.ndarray:
    """One parameter vector over a grid of inputs.  Shape (len(x),)."""
    values = np.asarray(values, dtype=np.float64).ravel()
    if values.size != spec.n_params:
        raise ValueError("parameter vector does not match the architecture")
    out = kernels.batch_forward(values[None, :], spec.layer_sizes, spec.act_code,
                                np.asarray(x, dtype=np.float64))
    return out[0]


def forward_batch(spec: NetworkSpec, values: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Many parameter vectors over a grid of inputs.  Shape (n, len(x))."""
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 2 or values.shape[1] != spec.n_params:
        raise ValueError("parameter matrix does not match the architecture")
    return kernels.batch_forward(values, spec.layer_sizes, spec.act_code,
                                 np.asarray(x, dtype=np.float64))


def forward_grad(spec: NetworkSpec, params: ParamVector | np.ndarray,
                 x) -> np.ndarray:
    """Analytic d(output)/d(params) by backprop.

    ``x`` may be a scalar or a grid; the result has shape (n_params,) or
    (len(x), n_params) respectively.
    """
    values = params.values if isinstance(params, ParamVector) else np.asarray(params)
    x_arr = np.atleast_1d(np.asarray(x, dtype=np.float64))
    scalar = np.ndim(x) == 0
    per_layer = unflatten(spec, values)
    act = spec.activation

    # forward, keeping inputs to each layer and hidden pre-activations
    h = x_arr[None, :]                      # (width, m)
    inputs, preacts = [], []
    for li, (w, b) in enumerate(per_layer):
        inputs.append(h)
        z = w @ h + b[:, None]
        if li < len(per_layer) - 1:
            preacts.append(z)
            h = _act_value(z, act)
        else:
            h = z
    if h.shape[0] != 1:
        raise ValueError("gradient assumes a scalar output layer")

    m = x_arr.size
    grads = []
    delta = np.ones((1, m))                 # d(output)/d(z_L)
    for li in range(len(per_layer) - 1, -1, -1):
        w, _ = per_layer[li]
        gw = delta[:, None, :] * inputs[li][None, :, :]   # (out, in, m)
        gb = delta                                        # (out, m)
        grads.append((gw, gb))
        if li > 0:
            delta = (w.T @ delta) * _act_deriv(preacts[li - 1], act)
    grads.reverse()

    flat = np.concatenate([np.concatenate([gw.reshape(-1, m), gb]) for gw, gb in grads])
    return flat[:, 0] if scalar else flat.T


def log_likelihood(data, spec: NetworkSpec, params: ParamVector | np.ndarray) -> float:
    """Sum of Gaussian log-densities of the residuals at known noise variance."""
    values = params.values if isinstance(params, ParamVector) else params
    return float(log_likelihood_batch(data, spec, np.asarray(values)[None, :])[0])


def log_likelihood_batch(data, spec: NetworkSpec, values: np.ndarray) -> np.ndarray:
    if data.noise_var <= 0:
        raise ValueError("noise_var must be positive")
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 2 or values.shape[1] != spec.n_params:
        raise ValueError("parameter matrix does not match the architecture")
    return kernels.batch_log_likelihood(values, spec.layer_sizes, spec.act_code,
                                        data.x, data.y, float(data.noise_var))


def log_likelihood_grad(data, spec: NetworkSpec,
                        params: ParamVector | np.ndarray) -> np.ndarray:
    """Analytic gradient of the log-likelihood with respect to the parameters."""
    values = params.values if isinstance(params, ParamVector) else params
    pred = forward_many(spec, values, data.x)
    resid = data.y - pred
    jac = forward_grad(spec, values, data.x)       # (m, n_params)
    return jac.T @ resid / data.noise_var
