import numpy as np
import pytest

from sparsebnn.data import generate_boxcar_dataset
from sparsebnn.laplace import (LaplaceFit, MapConfig, MapNotConverged, find_map,
                               hessian_fd, laplace_fit, laplace_kernel,
                               laplace_table)
from sparsebnn.modes import extend_to_width
from sparsebnn.network import (NetworkSpec, layout_for, log_likelihood,
                               log_likelihood_batch, log_likelihood_grad)
from sparsebnn.nsbl import Hyperprior, log_evidence, optimize_alpha
from sparsebnn.priors import all_ard

SPEC_131 = NetworkSpec((1, 3, 1))


def gaussian_target(mu, cov):
    prec = np.linalg.inv(cov)

    def logp(v):
        d = np.asarray(v) - mu
        return float(-0.5 * d @ prec @ d)

    def grad(v):
        return -prec @ (np.asarray(v) - mu)

    return logp, grad


class TestFindMap:
    def test_gaussian_mode(self):
        mu = np.array([1.3, -0.7])
        cov = np.array([[2.0, 0.3], [0.3, 0.5]])
        logp, grad = gaussian_target(mu, cov)
        x = find_map(logp, grad, np.zeros(2))
        assert np.allclose(x, mu, atol=1e-6)

    def test_quadratic_one_newton_step(self):
        mu = np.array([2.0, -1.0, 0.5])
        cov = np.diag([1.0, 0.5, 2.0])
        logp, grad = gaussian_target(mu, cov)
        x = find_map(logp, grad, np.zeros(3), MapConfig(method="newton"))
        assert np.allclose(x, mu, atol=1e-6)

    def test_nonconvergence_raises_with_best(self):
        logp = lambda v: float(v[0])          # unbounded: never converges
        grad = lambda v: np.ones(1)
        with pytest.raises(MapNotConverged) as err:
            find_map(logp, grad, np.zeros(1), MapConfig(max_iter=5))
        assert err.value.best is not None

    def test_mode_seeded_131_start(self):
        ds = generate_boxcar_dataset(50, -3, 3, 0.5, seed=5)
        logp = lambda v: log_likelihood(ds, SPEC_131, v)
        grad = lambda v: log_likelihood_grad(ds, SPEC_131, v)
        start = extend_to_width(5, 3)
        x = find_map(logp, grad, start, MapConfig(bounds=(-30.0, 30.0)))
        pv = start.copy()
        pv.values = x
        # combination-5 sign pattern: first output weight negative
        assert pv["W^[2]_{11}"] < 0
        # the disconnected third neuron stays exactly off
        assert pv["W^[2]_{13}"] == 0.0
        assert pv["W^[1]_{31}"] == 0.0
        assert pv["b^[1]_3"] == 0.0


class TestHessianFd:
    def test_matches_analytic_on_gaussian(self):
        mu = np.array([0.5, -0.2])
        cov = np.array([[1.5, 0.4], [0.4, 0.8]])
        _, grad = gaussian_target(mu, cov)
        h = hessian_fd(grad, np.array([0.1, 0.3]))
        assert np.allclose(h, -np.linalg.inv(cov), rtol=1e-7)

    def test_symmetrized(self):
        rng = np.random.default_rng(0)
        A = rng.normal(size=(3, 3))
        grad = lambda v: A @ v                      # non-symmetric jacobian
        h = hessian_fd(grad, rng.normal(size=3))
        assert np.max(np.abs(h - h.T)) == 0.0


class TestLaplaceFit:
    def fit_131(self, seed=5):
        ds = generate_boxcar_dataset(50, -3, 3, 0.5, seed=seed)
        logp = lambda v: log_likelihood(ds, SPEC_131, v)
        grad = lambda v: log_likelihood_grad(ds, SPEC_131, v)
        start = extend_to_width(5, 3)
        return laplace_fit(logp, grad, start, MapConfig(bounds=(-30.0, 30.0))), ds

    def test_gaussian_toy_recovers_moments_exactly(self):
        mu = np.array([1.0, -2.0])
        cov = np.array([[0.8, 0.2], [0.2, 1.1]])
        logp, grad = gaussian_target(mu, cov)
        fit = laplace_fit(logp, grad, np.zeros(2))
        assert fit.converged and not fit.placeholder_idx and not fit.regularized
        assert np.allclose(fit.phi_map, mu, atol=1e-6)
        assert np.allclose(fit.sigma, cov, rtol=1e-6)
        # feeding the kernel to the evidence machinery reproduces the closed form
        g = laplace_kernel(fit)
        la = np.array([0.3, -0.6])
        c = cov + np.diag(np.exp(-la))
        expected = -0.5 * (2 * np.log(2 * np.pi) + np.log(np.linalg.det(c))
                           + mu @ np.linalg.solve(c, mu))
        assert log_evidence(g, la, all_ard(2)) == pytest.approx(expected, rel=1e-5)

    def test_131_mode_placeholders(self):
        fit, _ = self.fit_131()
        layout = layout_for(SPEC_131)
        names = {layout.names[i] for i in fit.placeholder_idx}
        assert names == {"W^[1]_{31}", "b^[1]_3", "W^[2]_{13}"}
        for i in fit.placeholder_idx:
            assert fit.sigma[i, i] == pytest.approx(1.0, rel=1e-12)
            off = np.delete(fit.sigma[i], i)
            assert np.max(np.abs(off)) < 1e-12
        np.linalg.cholesky(fit.sigma)
        sym = np.max(np.abs(fit.hessian - fit.hessian.T)) / np.max(np.abs(fit.hessian))
        assert sym < 1e-8

    def test_gradient_small_at_mode(self):
        fit, ds = self.fit_131()
        # numerical gradient of the target at the mode
        h = 1e-5
        for i in range(SPEC_131.n_params):
            vp, vm = fit.phi_map.copy(), fit.phi_map.copy()
            vp[i] += h
            vm[i] -= h
            fd = (log_likelihood(ds, SPEC_131, vp)
                  - log_likelihood(ds, SPEC_131, vm)) / (2 * h)
            assert abs(fd) < 1e-4

    def test_sparse_learning_prunes_off_neuron_and_shrinks_variance(self):
        fit, _ = self.fit_131()
        g = laplace_kernel(fit)
        part = all_ard(SPEC_131.n_params)
        res = optimize_alpha(g, Hyperprior(), part, seed=0, n_starts=8)
        layout = layout_for(SPEC_131)
        gam = dict(zip(layout.names, res.gamma_rms))
        assert gam["W^[2]_{13}"] < 1e-3
        assert gam["W^[1]_{31}"] < 1e-3
        assert gam["b^[1]_3"] < 1e-3
        # posterior variance never increases through sparse learning
        post = res.posterior.kernels[0]
        for i in range(SPEC_131.n_params):
            assert post.sigma[i, i] <= fit.sigma[i, i] * (1 + 1e-9)

    def test_unconverged_fit_rejected_by_kernel(self):
        fit = LaplaceFit(phi_map=np.zeros(2), hessian=np.eye(2), sigma=np.eye(2),
                         converged=False, mode_seed=np.zeros(2))
        with pytest.raises(MapNotConverged):
            laplace_kernel(fit)

    def test_table_rows(self):
        fit, _ = self.fit_131()
        layout = layout_for(SPEC_131)
        g = laplace_kernel(fit)
        part = all_ard(SPEC_131.n_params)
        res = optimize_alpha(g, Hyperprior(), part, seed=0, n_starts=4)
        rows = laplace_table(fit, layout, res, part)
        assert len(rows) == 10
        assert {r["name"] for r in rows} == set(layout.names)
        for r in rows:
            assert {"phi_map", "sigma_ii", "placeholder", "log_alpha_map",
                    "gamma_rms", "m_i", "P_ii"} <= set(r)
            assert r["P_ii"] <= r["sigma_ii"] * (1 + 1e-9)
