import numpy as np
import pytest

from sparsebnn import kernels
from sparsebnn.kernels import _ref

compiled = kernels.available_backends().get("compiled")
needs_compiled = pytest.mark.skipif(compiled is None,
                                    reason="compiled kernels not built")


def cases():
    rng = np.random.default_rng(0)
    specs = [((1, 2, 1), 0), ((1, 3, 1), 0), ((1, 3, 1), 1), ((1, 4, 2, 1), 0),
             ((1, 5, 1), 2)]
    for sizes, act in specs:
        n_par = sum(sizes[l] * sizes[l - 1] + sizes[l]
                    for l in range(1, len(sizes)))
        values = rng.normal(size=(40, n_par)) * 2
        x = np.linspace(-4, 4, 33)
        y = rng.normal(size=33)
        yield sizes, act, values, x, y


@needs_compiled
def test_backends_agree_on_forward():
    for sizes, act, values, x, _ in cases():
        a = _ref.batch_forward(values, sizes, act, x)
        b = compiled.batch_forward(values, sizes, act, x)
        assert np.allclose(a, b, rtol=1e-13, atol=1e-13), (sizes, act)


@needs_compiled
def test_backends_agree_on_log_likelihood():
    for sizes, act, values, x, y in cases():
        a = _ref.batch_log_likelihood(values, sizes, act, x, y, 0.5)
        b = compiled.batch_log_likelihood(values, sizes, act, x, y, 0.5)
        assert np.allclose(a, b, rtol=1e-12, atol=1e-10), (sizes, act)


@needs_compiled
def test_compiled_rejects_vector_io_layers():
    with pytest.raises(ValueError):
        compiled.batch_forward(np.zeros((1, 11)), (2, 3, 1), 0,
                               np.array([0.0]))


def test_active_backend_exposed():
    assert kernels.backend_name() in kernels.available_backends()


def test_env_override_selects_numpy(monkeypatch):
    # selection happens at import; simulate by checking the module logic
    import importlib
    import os
    monkeypatch.setenv("SPARSEBNN_NO_COMPILED", "1")
    mod = importlib.reload(kernels)
    try:
        assert mod.backend_name() == "numpy"
    finally:
        monkeypatch.delenv("SPARSEBNN_NO_COMPILED")
        importlib.reload(kernels)
