import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sparsebnn.data import Dataset
from sparsebnn.modes import SPEC_121, mode_catalog, mode_param_vector
from sparsebnn.network import (NetworkSpec, ParamVector, flatten, forward,
                               forward_grad, forward_many, layout_for,
                               log_likelihood, log_likelihood_grad, unflatten)

REF_NAMED = {"W^[2]_{11}": 2.0, "W^[2]_{12}": 2.0, "W^[1]_{11}": 5.0,
             "W^[1]_{21}": -5.0, "b^[1]_1": 5.0, "b^[1]_2": 5.0, "b^[2]_1": 0.0}


def ref_params():
    return ParamVector.from_named(SPEC_121, REF_NAMED)


class TestSpec:
    def test_param_count(self):
        assert NetworkSpec((1, 2, 1)).n_params == 7
        assert NetworkSpec((1, 3, 1)).n_params == 10
        assert NetworkSpec((2, 4, 3, 1)).n_params == (8 + 4) + (12 + 3) + (3 + 1)

    def test_rejects_bad_sizes(self):
        with pytest.raises(ValueError):
            NetworkSpec((3,))
        with pytest.raises(ValueError):
            NetworkSpec((1, 0, 1))
        with pytest.raises(ValueError):
            NetworkSpec((1, 2, 1), activation="softplus")

    def test_layout_names_unique_and_stable(self):
        layout = layout_for(NetworkSpec((1, 3, 1)))
        assert len(set(layout.names)) == len(layout) == 10
        assert layout.names[0] == "W^[1]_{11}"
        assert "b^[2]_1" in layout.names
        assert layout.index_of("W^[2]_{13}") == layout.names.index("W^[2]_{13}")


class TestForward:
    def test_reference_point_at_zero(self):
        # hand evaluation: 2*tanh(5) + 2*tanh(5) at x = 0
        y = forward(SPEC_121, ref_params(), 0.0)
        assert y == pytest.approx(4.0 * np.tanh(5.0), abs=1e-12)
        assert y == pytest.approx(3.99964, abs=1e-5)

    def test_saturation_cancels(self):
        y = forward(SPEC_121, ref_params(), 1e6)
        assert y == pytest.approx(0.0, abs=1e-12)

    def test_zero_params_zero_everywhere(self):
        pv = ParamVector.zeros(SPEC_121)
        for x in (-3.0, 0.0, 2.5):
            assert forward(SPEC_121, pv, x) == 0.0

    def test_dimension_mismatch_raises(self):
        with pytest.raises(ValueError):
            forward_many(SPEC_121, np.zeros(9), np.array([0.0]))

    @pytest.mark.parametrize("act", ["tanh", "sigmoid", "relu"])
    def test_forward_matches_manual_eval(self, act):
        spec = NetworkSpec((1, 3, 1), act)
        rng = np.random.default_rng(7)
        values = rng.normal(size=spec.n_params)
        (w1, b1), (w2, b2) = unflatten(spec, values)
        for x in (-1.3, 0.0, 0.7):
            z = w1[:, 0] * x + b1
            if act == "tanh":
                h = np.tanh(z)
            elif act == "sigmoid":
                h = 1 / (1 + np.exp(-z))
            else:
                h = np.maximum(z, 0)
            expected = float((w2 @ h + b2)[0])
            assert forward(spec, values, x) == pytest.approx(expected, rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.integers(min_value=1, max_value=4), min_size=1, max_size=3),
       st.integers(0, 2 ** 31 - 1))
def test_flatten_unflatten_roundtrip(hidden, seed):
    spec = NetworkSpec((1, *hidden, 1))
    rng = np.random.default_rng(seed)
    values = rng.normal(size=spec.n_params)
    assert np.array_equal(flatten(spec, unflatten(spec, values)), values)


def test_mode_symmetry_on_grid():
    # all eight combinations define the same function
    grid = np.linspace(-5, 5, 201)
    curves = [forward_many(SPEC_121, mode_param_vector(k).values, grid)
              for k in range(1, 9)]
    for c in curves[1:]:
        assert np.max(np.abs(c - curves[0])) < 1e-12


def test_mode_catalog_matches_reference():
    assert mode_catalog()[0] == REF_NAMED


class TestLogLikelihood:
    def test_zero_residuals(self):
        spec = SPEC_121
        pv = ref_params()
        x = np.linspace(-2, 2, 11)
        y = forward_many(spec, pv.values, x)
        ds = Dataset(x, y, noise_var=0.7)
        expected = -0.5 * 11 * np.log(2 * np.pi * 0.7)
        assert log_likelihood(ds, spec, pv) == pytest.approx(expected, rel=1e-12)

    def test_single_point_unit_variance(self):
        spec = SPEC_121
        pv = ParamVector.zeros(spec)     # predicts 0 everywhere
        r = 1.7
        ds = Dataset(np.array([0.3]), np.array([r]), noise_var=1.0)
        expected = -0.5 * np.log(2 * np.pi) - r ** 2 / 2
        assert log_likelihood(ds, spec, pv) == pytest.approx(expected, rel=1e-12)

    def test_fifty_unit_residuals_half_variance(self):
        # closed-form sum: -25*log(pi) - 50
        spec = SPEC_121
        pv = ParamVector.zeros(spec)
        x = np.linspace(-3, 3, 50)
        ds = Dataset(x, np.ones(50), noise_var=0.5)
        assert log_likelihood(ds, spec, pv) == pytest.approx(-25 * np.log(np.pi) - 50,
                                                             rel=1e-12)

    def test_nonpositive_noise_var_rejected(self):
        with pytest.raises(ValueError):
            Dataset(np.array([0.0, 1.0]), np.zeros(2), noise_var=0.0)

    def test_maximized_at_generating_params_low_noise(self):
        spec = SPEC_121
        truth = ref_params()
        x = np.linspace(-3, 3, 50)
        y = forward_many(spec, truth.values, x)
        ds = Dataset(x, y, noise_var=1e-6)
        ll_truth = log_likelihood(ds, spec, truth)
        rng = np.random.default_rng(0)
        for _ in range(40):
            other = truth.values + rng.normal(scale=0.5, size=7)
            assert log_likelihood(ds, spec, other) < ll_truth


@pytest.mark.parametrize("act", ["tanh", "sigmoid", "relu"])
@pytest.mark.parametrize("sizes", [(1, 2, 1), (1, 3, 1), (1, 3, 2, 1)])
def test_forward_grad_matches_finite_differences(act, sizes):
    spec = NetworkSpec(sizes, act)
    rng = np.random.default_rng(11)
    values = rng.normal(size=spec.n_params) * 0.8
    x = 0.37  # away from relu kinks for the fd comparison
    analytic = forward_grad(spec, values, x)
    h = 1e-6
    for i in range(spec.n_params):
        vp, vm = values.copy(), values.copy()
        vp[i] += h
        vm[i] -= h
        fd = (forward(spec, vp, x) - forward(spec, vm, x)) / (2 * h)
        denom = max(abs(fd), 1e-8)
        assert abs(analytic[i] - fd) / denom < 1e-6


def test_log_likelihood_grad_matches_finite_differences():
    spec = NetworkSpec((1, 3, 1))
    rng = np.random.default_rng(3)
    values = rng.normal(size=spec.n_params)
    x = np.linspace(-3, 3, 20)
    y = np.sin(x)
    ds = Dataset(x, y, noise_var=0.5)
    analytic = log_likelihood_grad(ds, spec, values)
    h = 1e-6
    for i in range(spec.n_params):
        vp, vm = values.copy(), values.copy()
        vp[i] += h
        vm[i] -= h
        fd = (log_likelihood(ds, spec, vp) - log_likelihood(ds, spec, vm)) / (2 * h)
        assert abs(analytic[i] - fd) / max(abs(fd), 1e-8) < 1e-5


def test_param_vector_named_access_roundtrip():
    pv = ref_params()
    assert pv["W^[1]_{21}"] == -5.0
    pv["W^[1]_{21}"] = 1.25
    assert pv.to_named()["W^[1]_{21}"] == 1.25
    with pytest.raises(KeyError):
        pv["W^[9]_{99}"]
