import numpy as np
import pytest

from sparsebnn.priors import (FlatBox, GaussianPrior, PriorSpec, all_ard,
                              all_flat_box, log_prior, log_prior_batch,
                              sample_known)


def test_standard_normal_at_origin():
    d = 4
    prior = all_ard(d)
    val = log_prior(np.zeros(d), prior, log_alpha=np.zeros(d))
    assert val == pytest.approx(-0.5 * d * np.log(2 * np.pi), rel=1e-14)


def test_flat_box_inside_contributes_box_mass_only():
    prior = PriorSpec(2, (0,), {1: FlatBox(-30, 30)})
    inside = log_prior(np.array([0.0, 3.0]), prior, log_alpha=np.array([0.0]))
    base = log_prior(np.array([0.0, -7.0]), prior, log_alpha=np.array([0.0]))
    # flat inside: value independent of the known coordinate
    assert inside == pytest.approx(base, rel=1e-14)
    outside = log_prior(np.array([0.0, 31.0]), prior, log_alpha=np.array([0.0]))
    assert outside == -np.inf


def test_single_ard_component_closed_form():
    # N(1 | 0, e^{-2}) log-density
    prior = all_ard(1)
    got = log_prior(np.array([1.0]), prior, log_alpha=np.array([2.0]))
    expected = 0.5 * (2 - np.log(2 * np.pi)) - np.exp(2.0) / 2
    assert got == pytest.approx(expected, rel=1e-14)


def test_partition_must_cover():
    with pytest.raises(ValueError):
        PriorSpec(3, (0, 1), {1: FlatBox(-1, 1)})   # overlap
    with pytest.raises(ValueError):
        PriorSpec(3, (0,), {1: FlatBox(-1, 1)})     # index 2 uncovered


def test_dimension_checks():
    prior = all_ard(3)
    with pytest.raises(ValueError):
        log_prior(np.zeros(3), prior, log_alpha=np.zeros(2))
    with pytest.raises(ValueError):
        log_prior(np.zeros(4), prior, log_alpha=np.zeros(3))


def test_batch_matches_scalar():
    prior = PriorSpec(3, (0, 2), {1: GaussianPrior(1.0, 4.0)})
    rng = np.random.default_rng(0)
    X = rng.normal(size=(20, 3))
    la = np.array([0.3, -1.2])
    batch = log_prior_batch(X, prior, la)
    for row, lp in zip(X, batch):
        assert lp == pytest.approx(log_prior(row, prior, la), rel=1e-12)


def test_box_sampler_bounds_and_determinism():
    prior = all_flat_box(4, -2.0, 5.0)
    from sparsebnn.rngstream import stream
    a = sample_known(prior, stream(7, "prior"), 500)
    b = sample_known(prior, stream(7, "prior"), 500)
    assert np.array_equal(a, b)
    assert a.min() >= -2.0 and a.max() <= 5.0
    with pytest.raises(ValueError):
        sample_known(all_ard(2), stream(0, "x"), 5)
