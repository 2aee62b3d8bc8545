"""Joint sampling over parameters and their prior precisions.

The fully Bayesian baseline: instead of optimizing the ARD precisions, the
sampler targets the joint posterior of ``(phi, log alpha)`` under a proper
Gamma hyperprior truncated to a sampling box on the log scale.  The joint
chain runs through the same transitional MCMC machinery as the standard
pipeline, with the state vector laid out as the network parameters
followed by the log precisions of the ARD subset.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from . import network
from .priors import PriorSpec, log_prior_batch
from .tmcmc import TmcmcConfig, TmcmcResult, tmcmc_sample

_LOG_2PI = np.log(2.0 * np.pi)


@dataclass(frozen=True)
class TruncatedGammaLogAlpha:
    """Gamma(alpha | shape s, rate r) as a proper density on log alpha.

    The Jacobian of the log transform is included:
    ``p(t) ∝ exp(s*t - r*exp(t))``.  Truncation to ``[lo, hi]`` keeps the
    density proper and samplable even in the near-Jeffreys limit where the
    untruncated mass spreads over an unbounded log range.
    """

    s: float
    r: float
    lo: float
    hi: float

    def __post_init__(self):
        if self.s <= 0 or self.r <= 0:
            raise ValueError("shape and rate must be positive for sampling")
        if not self.lo < self.hi:
            raise ValueError("need lo < hi")
        object.__setattr__(self, "_log_norm", self._compute_log_norm())

    def _unnorm_log(self, t):
        return self.s * np.asarray(t, dtype=np.float64) - self.r * np.exp(np.asarray(t))

    def _compute_log_norm(self) -> float:
        peak = float(np.clip(np.log(self.s / self.r), self.lo, self.hi))
        shift = float(self._unnorm_log(peak))
        val, _ = quad(lambda t: np.exp(self._unnorm_log(t) - shift),
                      self.lo, self.hi, limit=400)
        return float(np.log(val) + shift)

    def log_pdf(self, t):
        t = np.asarray(t, dtype=np.float64)
        inside = (t >= self.lo) & (t <= self.hi)
        return np.where(inside, self._unnorm_log(t) - self._log_norm, -np.inf)

    def sample(self, rng, n: int) -> np.ndarray:
        # inverse CDF on a dense grid; the density is smooth and 1-D
        grid = np.linspace(self.lo, self.hi, 4097)
        dens = np.exp(self.log_pdf(grid))
        cdf = np.concatenate([[0.0], np.cumsum((dens[1:] + dens[:-1]) / 2
                                               * np.diff(grid))])
        cdf /= cdf[-1]
        return np.interp(rng.random(n), cdf, grid)


@dataclass(frozen=True)
class HierConfig:
    gamma_shape: float = 1.0 + np.exp(-10)
    gamma_rate: float = np.exp(-10)
    log_alpha_box: tuple[float, float] = (-10.0, 10.0)
    tmcmc: TmcmcConfig = TmcmcConfig()

    def __post_init__(self):
        if self.gamma_shape <= 0 or self.gamma_rate <= 0:
            raise ValueError("hyperprior shape and rate must be positive")

    def hyperprior(self) -> TruncatedGammaLogAlpha:
        return TruncatedGammaLogAlpha(self.gamma_shape, self.gamma_rate,
                                      *self.log_alpha_box)


@dataclass
class HierResult:
    tmcmc: TmcmcResult
    phi_names: list[str]
    alpha_names: list[str]
    n_phi: int
    n_alpha: int

    @property
    def phi_samples(self) -> np.ndarray:
        return self.tmcmc.samples[:, :self.n_phi]

    @property
    def log_alpha_samples(self) -> np.ndarray:
        return self.tmcmc.samples[:, self.n_phi:]

    @property
    def column_names(self) -> list[str]:
        return self.phi_names + self.alpha_names


def joint_log_posterior(phi, log_alpha, data, spec: network.NetworkSpec,
                        hcfg: HierConfig, partition: PriorSpec) -> float:
    """Log posterior of one ``(phi, log alpha)`` point, up to the evidence."""
    phi = np.asarray(phi, dtype=np.float64).ravel()
    log_alpha = np.asarray(log_alpha, dtype=np.float64).ravel()
    state = np.concatenate([phi, log_alpha])[None, :]
    parts = _joint_parts(data, spec, hcfg, partition)
    return float(parts["log_prior"](state)[0] + parts["log_like"](state)[0])


def _joint_parts(data, spec, hcfg: HierConfig, partition: PriorSpec):
    n_phi = spec.n_params
    n_alpha = partition.n_ard
    hyper = hcfg.hyperprior()

    def log_prior(states):
        states = np.asarray(states, dtype=np.float64)
        phi, la = states[:, :n_phi], states[:, n_phi:]
        out = np.zeros(states.shape[0])
        if n_alpha:
            ard = list(partition.ard_set)
            pa = phi[:, ard]
            out += np.sum(0.5 * (la - _LOG_2PI) - 0.5 * np.exp(la) * pa ** 2, axis=1)
            out += np.sum(hyper.log_pdf(la), axis=1)
        for idx, pr in partition.known.items():
            out += pr.log_pdf(phi[:, idx])
        return out

    def log_like(states):
        states = np.asarray(states, dtype=np.float64)
        return network.log_likelihood_batch(data, spec, states[:, :n_phi])

    def prior_sampler(rng, n):
        la = np.column_stack([hyper.sample(rng, n) for _ in range(n_alpha)]) \
            if n_alpha else np.empty((n, 0))
        phi = np.empty((n, n_phi))
        ard = list(partition.ard_set)
        for pos, idx in enumerate(ard):
            phi[:, idx] = rng.standard_normal(n) * np.exp(-0.5 * la[:, pos])
        for idx, pr in partition.known.items():
            phi[:, idx] = pr.sample(rng, n)
        return np.column_stack([phi, la])

    return {"log_prior": log_prior, "log_like": log_like,
            "prior_sampler": prior_sampler}


def run_hierarchical(data, spec: network.NetworkSpec, hcfg: HierConfig,
                     partition: PriorSpec | None = None,
                     trace_path=None) -> HierResult:
    """Joint TMCMC over ``(phi, log alpha)``; ARD on every parameter by default."""
    if partition is None:
        from .priors import all_ard
        partition = all_ard(spec.n_params)
    parts = _joint_parts(data, spec, hcfg, partition)
    result = tmcmc_sample(parts["prior_sampler"], parts["log_prior"],
                          parts["log_like"], hcfg.tmcmc, trace_path=trace_path)
    layout = network.layout_for(spec)
    ard_names = [layout.names[i] for i in partition.ard_set]
    return HierResult(tmcmc=result,
                      phi_names=list(layout.names),
                      alpha_names=[f"log_alpha_{n}" for n in ard_names],
                      n_phi=spec.n_params,
                      n_alpha=partition.n_ard)
