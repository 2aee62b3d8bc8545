"""Gaussian mixture fitting and evaluation.

EM with k-means++ initialization and BIC kernel-count selection.  The
initialization operates on the unique sample rows weighted by their
multiplicities, so duplicating every sample leaves the fit unchanged.
Covariances are floored each iteration by clamping eigenvalues at
``1e-8 * trace / dim``; a kernel count whose fit stays singular is
discarded.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.special import logsumexp

from .rngstream import stream

_LOG_2PI = np.log(2.0 * np.pi)


class GmmFitError(RuntimeError):
    pass


@dataclass(frozen=True)
class GaussianKernel:
    a: float
    mu: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mu", np.asarray(self.mu, dtype=np.float64).ravel())
        sigma = np.asarray(self.sigma, dtype=np.float64)
        sigma = sigma.reshape(self.mu.size, self.mu.size)
        object.__setattr__(self, "sigma", sigma)
        if self.a <= 0:
            raise ValueError("mixture coefficient must be positive")
        if not np.allclose(sigma, sigma.T, atol=1e-10 * max(1.0, float(np.abs(sigma).max()))):
            raise ValueError("covariance must be symmetric")
        try:
            np.linalg.cholesky(sigma)
        except np.linalg.LinAlgError:
            raise ValueError("covariance must be positive definite") from None

    @property
    def dim(self) -> int:
        return self.mu.size


class Gmm:
    """Immutable normalized Gaussian mixture."""

    def __init__(self, kernels: list[GaussianKernel]):
        if not kernels:
            raise ValueError("mixture needs at least one kernel")
        dim = kernels[0].dim
        if any(k.dim != dim for k in kernels):
            raise ValueError("all kernels must share the dimension")
        total = sum(k.a for k in kernels)
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"mixture coefficients sum to {total!r}, expected 1")
        self.kernels = tuple(kernels)
        self.dim = dim

    def __len__(self) -> int:
        return len(self.kernels)

    @property
    def weights(self) -> np.ndarray:
        return np.array([k.a for k in self.kernels])

    @property
    def means(self) -> np.ndarray:
        return np.stack([k.mu for k in self.kernels])

    def log_pdf(self, phi: np.ndarray) -> np.ndarray:
        """Mixture log-density, log-sum-exp over kernels.

        Accepts a single vector or an (n, dim) matrix.
        """
        phi = np.asarray(phi, dtype=np.float64)
        single = phi.ndim == 1
        X = phi[None, :] if single else phi
        if X.shape[1] != self.dim:
            raise ValueError("phi dimension does not match the mixture")
        parts = np.stack([_gauss_logpdf(X, k.mu, k.sigma) + np.log(k.a)
                          for k in self.kernels])
        out = logsumexp(parts, axis=0)
        return float(out[0]) if single else out

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Ancestral sampling: categorical kernel index, then a Gaussian draw."""
        idx = rng.choice(len(self.kernels), size=n, p=self.weights)
        out = np.empty((n, self.dim))
        chols = [np.linalg.cholesky(k.sigma) for k in self.kernels]
        eps = rng.standard_normal((n, self.dim))
        for i, (k, L) in enumerate(zip(self.kernels, chols)):
            mask = idx == i
            out[mask] = k.mu + eps[mask] @ L.T
        return out

    def to_dict(self) -> dict:
        return {"dim": self.dim,
                "kernels": [{"a": float(k.a), "mu": k.mu.tolist(),
                             "sigma": k.sigma.tolist()} for k in self.kernels]}

    @classmethod
    def from_dict(cls, d: dict) -> "Gmm":
        kernels = [GaussianKernel(k["a"], np.array(k["mu"]), np.array(k["sigma"]))
                   for k in d["kernels"]]
        g = cls(kernels)
        if g.dim != d["dim"]:
            raise ValueError("dim field inconsistent with kernels")
        return g

    def save(self, path: str | Path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)
            fh.write("\n")

    @classmethod
    def load(cls, path: str | Path) -> "Gmm":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def gmm_logpdf(g: Gmm, phi: np.ndarray):
    return g.log_pdf(phi)


def _gauss_logpdf(X: np.ndarray, mu: np.ndarray, sigma: np.ndarray) -> np.ndarray:
    d = mu.size
    cf = cho_factor(sigma, lower=True)
    logdet = 2.0 * np.sum(np.log(np.diag(cf[0])))
    dev = X - mu
    solved = cho_solve(cf, dev.T)
    quad = np.einsum("ij,ji->i", dev, solved)
    return -0.5 * (d * _LOG_2PI + logdet + quad)


def _floor_covariance(sigma: np.ndarray) -> np.ndarray:
    """Clamp eigenvalues at 1e-8 * trace / dim (keeps EM away from collapse)."""
    sigma = 0.5 * (sigma + sigma.T)
    d = sigma.shape[0]
    floor = 1e-8 * max(np.trace(sigma), 0.0) / d
    if floor <= 0:
        raise GmmFitError("kernel collapsed to zero covariance")
    vals, vecs = np.linalg.eigh(sigma)
    if vals[0] >= floor:
        return sigma
    vals = np.maximum(vals, floor)
    return (vecs * vals) @ vecs.T


def _kmeanspp_centers(unique_x: np.ndarray, counts: np.ndarray, k: int,
                      rng: np.random.Generator) -> np.ndarray:
    """Weighted k-means++ seeding over the distinct sample values."""
    n = unique_x.shape[0]
    p = counts / counts.sum()
    centers = [unique_x[rng.choice(n, p=p)]]
    d2 = np.sum((unique_x - centers[0]) ** 2, axis=1)
    for _ in range(1, k):
        w = counts * d2
        total = w.sum()
        probs = p if total <= 0 else w / total
        centers.append(unique_x[rng.choice(n, p=probs)])
        d2 = np.minimum(d2, np.sum((unique_x - centers[-1]) ** 2, axis=1))
    return np.stack(centers)


def _init_params(X: np.ndarray, k: int, rng: np.random.Generator):
    unique_x, counts = np.unique(X, axis=0, return_counts=True)
    if unique_x.shape[0] < k:
        raise GmmFitError(f"fewer than {k} distinct samples")
    centers = _kmeanspp_centers(unique_x, counts.astype(np.float64), k, rng)
    d2 = np.sum((X[:, None, :] - centers[None, :, :]) ** 2, axis=2)
    assign = np.argmin(d2, axis=1)
    weights = np.empty(k)
    means = np.empty((k, X.shape[1]))
    covs = np.empty((k, X.shape[1], X.shape[1]))
    base = np.cov(X.T).reshape(X.shape[1], X.shape[1])
    for j in range(k):
        mask = assign == j
        nj = mask.sum()
        weights[j] = max(nj, 1) / X.shape[0]
        if nj == 0:
            means[j] = centers[j]
            covs[j] = _floor_covariance(base)
            continue
        means[j] = X[mask].mean(axis=0)
        dev = X[mask] - means[j]
        covs[j] = _floor_covariance(dev.T @ dev / nj if nj > 1 else base)
    weights /= weights.sum()
    return weights, means, covs


def _em_fit(X: np.ndarray, k: int, rng: np.random.Generator,
            max_iter: int = 500, tol: float = 1e-8):
    """One EM run; returns (weights, means, covs, loglik)."""
    n = X.shape[0]
    weights, means, covs = _init_params(X, k, rng)
    prev_ll = -np.inf
    log_resp = np.empty((n, k))
    for _ in range(max_iter):
        for j in range(k):
            log_resp[:, j] = np.log(weights[j]) + _gauss_logpdf(X, means[j], covs[j])
        row_norm = logsumexp(log_resp, axis=1)
        ll = float(row_norm.sum())
        resp = np.exp(log_resp - row_norm[:, None])

        nk = resp.sum(axis=0)
        if np.any(nk < 1e-10):
            raise GmmFitError("kernel responsibility collapsed")
        weights = nk / n
        means = (resp.T @ X) / nk[:, None]
        for j in range(k):
            dev = X - means[j]
            cov = (dev * resp[:, j:j + 1]).T @ dev / nk[j]
            covs[j] = _floor_covariance(cov)

        if abs(ll - prev_ll) < tol * abs(ll):
            break
        prev_ll = ll
    return weights, means, covs, ll


def bic_score(loglik: float, k: int, dim: int, n: int) -> float:
    n_free = (k - 1) + k * dim + k * dim * (dim + 1) // 2
    return -2.0 * loglik + n_free * np.log(n)


def fit_gmm(samples: np.ndarray, k_candidates=None, n_restarts: int = 2,
            seed: int = 0) -> Gmm:
    """Fit mixtures for each candidate kernel count and keep the BIC winner.

    Each (k, restart) pair runs EM from its own k-means++ seeding with an
    RNG derived from ``(seed, k, restart)``, so the fit is deterministic
    and parallelizable.  Kernel counts whose EM degenerates (collapse that
    survives the covariance floor) are dropped; if every candidate drops,
    a GmmFitError is raised.
    """
    X = np.asarray(samples, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("samples must be a 2-D matrix")
    n, dim = X.shape
    if n < 10 * dim:
        raise ValueError(f"need at least {10 * dim} samples for dim {dim}")
    if k_candidates is None:
        k_candidates = range(1, 13)
    ks = sorted({int(k) for k in k_candidates})
    if not ks or ks[0] < 1:
        raise ValueError("k_candidates must be positive integers")

    best = None  # (bic, k, weights, means, covs)
    for k in ks:
        run = None
        for restart in range(n_restarts):
            rng = stream(seed, "gmm", k, restart)
            try:
                weights, means, covs, ll = _em_fit(X, k, rng)
            except (GmmFitError, np.linalg.LinAlgError):
                continue
            if run is None or ll > run[0]:
                run = (ll, weights, means, covs)
        if run is None:
            continue
        ll, weights, means, covs = run
        bic = bic_score(ll, k, dim, n)
        if best is None or bic < best[0]:
            best = (bic, k, weights, means, covs)
    if best is None:
        raise GmmFitError("every candidate kernel count degenerated")

    _, _, weights, means, covs = best
    weights = weights / weights.sum()
    return Gmm([GaussianKernel(w, m, c) for w, m, c in zip(weights, means, covs)])
