"""Parameter priors: the ARD / known-prior partition and its log-densities.

The parameter vector is split into two disjoint index sets: the ARD subset
(zero-mean Gaussians whose precisions are the hyperparameters being
learned) and the known subset with prescribed priors, either a proper
bounded uniform box or a Gaussian.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_LOG_2PI = np.log(2.0 * np.pi)


@dataclass(frozen=True)
class FlatBox:
    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError("flat-box prior needs lo < hi")

    def log_pdf(self, v):
        v = np.asarray(v, dtype=np.float64)
        inside = (v >= self.lo) & (v <= self.hi)
        return np.where(inside, -np.log(self.hi - self.lo), -np.inf)

    def sample(self, rng, n: int) -> np.ndarray:
        return rng.uniform(self.lo, self.hi, size=n)


@dataclass(frozen=True)
class GaussianPrior:
    mean: float
    var: float

    def __post_init__(self):
        if self.var <= 0:
            raise ValueError("gaussian prior needs var > 0")

    def log_pdf(self, v):
        v = np.asarray(v, dtype=np.float64)
        return -0.5 * (_LOG_2PI + np.log(self.var)) - 0.5 * (v - self.mean) ** 2 / self.var

    def sample(self, rng, n: int) -> np.ndarray:
        return rng.normal(self.mean, np.sqrt(self.var), size=n)


@dataclass(frozen=True)
class PriorSpec:
    """Disjoint partition of the flat parameter indices.

    ``ard_set`` carries the learned-precision Gaussians; ``known`` maps each
    remaining index to its prescribed prior.  Together they must cover every
    index exactly once.
    """

    n_params: int
    ard_set: tuple[int, ...]
    known: dict  # index -> FlatBox | GaussianPrior

    def __post_init__(self):
        ard = tuple(int(i) for i in self.ard_set)
        object.__setattr__(self, "ard_set", ard)
        covered = set(ard) | set(self.known)
        if len(ard) + len(self.known) != self.n_params or covered != set(range(self.n_params)):
            raise ValueError("ard_set and known_set must partition the indices")

    @property
    def known_set(self) -> tuple[int, ...]:
        return tuple(sorted(self.known))

    @property
    def n_ard(self) -> int:
        return len(self.ard_set)


def all_ard(n_params: int) -> PriorSpec:
    return PriorSpec(n_params, tuple(range(n_params)), {})


def all_flat_box(n_params: int, lo: float = -30.0, hi: float = 30.0) -> PriorSpec:
    box = FlatBox(lo, hi)
    return PriorSpec(n_params, (), {i: box for i in range(n_params)})


def log_prior(params, prior: PriorSpec, log_alpha=None) -> float:
    """Log-density of the full prior at one parameter vector.

    ``log_alpha`` aligns with ``prior.ard_set`` and is required whenever the
    ARD subset is non-empty.
    """
    values = np.asarray(getattr(params, "values", params), dtype=np.float64).ravel()
    if values.size != prior.n_params:
        raise ValueError("parameter vector does not match the prior partition")
    total = 0.0
    if prior.n_ard:
        la = np.asarray(log_alpha, dtype=np.float64).ravel()
        if la.size != prior.n_ard:
            raise ValueError("log_alpha length must equal |ard_set|")
        phi = values[list(prior.ard_set)]
        total += float(np.sum(0.5 * (la - _LOG_2PI) - 0.5 * np.exp(la) * phi ** 2))
    for idx, pr in prior.known.items():
        total += float(pr.log_pdf(values[idx]))
    return total


def log_prior_batch(values: np.ndarray, prior: PriorSpec, log_alpha=None) -> np.ndarray:
    """Vectorized ``log_prior`` over the rows of ``values``."""
    values = np.asarray(values, dtype=np.float64)
    out = np.zeros(values.shape[0])
    if prior.n_ard:
        la = np.asarray(log_alpha, dtype=np.float64).ravel()
        phi = values[:, list(prior.ard_set)]
        out += np.sum(0.5 * (la - _LOG_2PI) - 0.5 * np.exp(la) * phi ** 2, axis=1)
    for idx, pr in prior.known.items():
        out += pr.log_pdf(values[:, idx])
    return out


def sample_known(prior: PriorSpec, rng, n: int) -> np.ndarray:
    """Draw ``n`` i.i.d. vectors from the known-set priors (ARD set must be empty)."""
    if prior.n_ard:
        raise ValueError("sample_known requires an empty ARD set")
    out = np.empty((n, prior.n_params))
    for idx in range(prior.n_params):
        out[:, idx] = prior.known[idx].sample(rng, n)
    return out
