"""Transitional MCMC: staged tempering from prior to posterior.

The sampler anneals ``p_beta(x) ∝ prior(x) * likelihood(x)^beta`` from
``beta = 0`` to ``beta = 1``.  Each stage picks the largest admissible
temperature increment (bounded by the coefficient of variation of the
incremental importance weights), resamples, and disperses the particles
with Metropolis-Hastings moves whose proposal covariance is a scaled
weighted sample covariance.  The stage-wise mean weights compound into an
estimate of the model evidence.

Determinism: all draws derive from named streams keyed by
``(seed, stage, chain)``, so results are bit-reproducible and independent
of evaluation order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import logsumexp

from .rngstream import stream


class TmcmcError(RuntimeError):
    pass


@dataclass(frozen=True)
class TmcmcConfig:
    n_samples: int = 2000
    target_cov: float = 1.0        # target CoV of incremental stage weights
    proposal_scale: float = 0.2    # MH proposal sd = scale * weighted sample sd
    max_stages: int = 100
    seed: int = 0
    n_mh_steps: int = 1

    def __post_init__(self):
        if self.n_samples < 2:
            raise ValueError("n_samples must be >= 2")
        if self.target_cov <= 0:
            raise ValueError("target_cov must be positive")
        if not 0 < self.proposal_scale <= 1:
            raise ValueError("proposal_scale must be in (0, 1]")
        if self.max_stages < 1:
            raise ValueError("max_stages must be positive")
        if self.n_mh_steps < 0:
            raise ValueError("n_mh_steps must be >= 0")


@dataclass(frozen=True)
class StageInfo:
    beta: float
    log_mean_weight: float
    acc_rate: float


@dataclass
class TmcmcResult:
    samples: np.ndarray            # (n_samples, dim) at beta = 1
    log_evidence: float
    stages: list[StageInfo]
    reached_beta_one: bool = True
    final_loglikes: np.ndarray | None = field(default=None, repr=False)

    @property
    def betas(self) -> np.ndarray:
        return np.array([s.beta for s in self.stages])


def weight_cov(loglikes: np.ndarray, d_beta: float) -> float:
    """Sample coefficient of variation of ``exp(d_beta * loglikes)``.

    Shift-invariant in log space, so it is computed on centered loglikes.
    Uses the ddof=1 standard deviation.
    """
    z = d_beta * (loglikes - loglikes.max())
    w = np.exp(z)
    mean = w.mean()
    if mean == 0:
        return np.inf
    return float(w.std(ddof=1) / mean)


def select_next_beta(loglikes: np.ndarray, beta: float, target_cov: float) -> float:
    """Largest ``beta' in (beta, 1]`` whose stage weights keep CoV <= target.

    Found by bisection; returns 1.0 outright when the constraint is already
    satisfied there (including the degenerate all-equal-loglikes case).
    """
    loglikes = np.asarray(loglikes, dtype=np.float64)
    if not 0 <= beta < 1:
        raise ValueError("beta must be in [0, 1)")
    if np.all(loglikes == loglikes.flat[0]):
        return 1.0
    if not np.isfinite(target_cov) or weight_cov(loglikes, 1.0 - beta) <= target_cov:
        return 1.0
    lo, hi = beta, 1.0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if weight_cov(loglikes, mid - beta) <= target_cov:
            lo = mid
        else:
            hi = mid
    return lo if lo > beta else 0.5 * (beta + hi)


def _weighted_covariance(samples: np.ndarray, weights: np.ndarray) -> np.ndarray:
    mean = weights @ samples
    centered = samples - mean
    cov = (centered * weights[:, None]).T @ centered
    return 0.5 * (cov + cov.T)


def _proposal_cholesky(cov: np.ndarray, scale: float) -> np.ndarray:
    dim = cov.shape[0]
    cov = scale * scale * cov
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        # singular weighted covariance: regularize the diagonal
        bump = 1e-10 * max(np.trace(cov), 1e-300) / dim
        return np.linalg.cholesky(cov + bump * np.eye(dim))


def _mh_sweeps(samples, cur_logp, log_target_batch, chol, n_steps, seed, stage):
    """Resampled particles dispersed by per-chain MH moves.

    ``cur_logp`` holds the target log-density of each particle; both are
    updated in place and the acceptance rate over all sweeps is returned.
    """
    n, dim = samples.shape
    if n_steps == 0:
        return samples, cur_logp, 0.0
    gens = [stream(seed, "tmcmc", "mh", stage, c) for c in range(n)]
    accepted = 0
    for _ in range(n_steps):
        eps = np.empty((n, dim))
        logu = np.empty(n)
        for c, g in enumerate(gens):
            eps[c] = g.standard_normal(dim)
            logu[c] = np.log(g.random())
        proposals = samples + eps @ chol.T
        prop_logp = log_target_batch(proposals)
        accept = logu < prop_logp - cur_logp
        samples[accept] = proposals[accept]
        cur_logp[accept] = prop_logp[accept]
        accepted += int(accept.sum())
    return samples, cur_logp, accepted / (n * n_steps)


def metropolis_stage(samples: np.ndarray, weights: np.ndarray, log_target,
                     cfg: TmcmcConfig, stage: int = 0) -> np.ndarray:
    """One resample-move step: multinomial resampling then MH dispersal.

    ``log_target`` must accept an (n, dim) matrix and return (n,) log
    densities.  Detailed balance holds w.r.t. ``log_target``.
    """
    samples = np.asarray(samples, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    if np.any(weights < 0) or not np.any(weights > 0):
        raise TmcmcError("weights must be non-negative and not all zero")
    wsum = weights.sum()
    norm = weights / wsum
    cov = _weighted_covariance(samples, norm)
    chol = _proposal_cholesky(cov, cfg.proposal_scale)

    rng = stream(cfg.seed, "tmcmc", "resample", stage)
    idx = rng.choice(samples.shape[0], size=samples.shape[0], p=norm)
    moved = samples[idx].copy()
    cur_logp = np.asarray(log_target(moved), dtype=np.float64)
    moved, _, _ = _mh_sweeps(moved, cur_logp, log_target, chol,
                             cfg.n_mh_steps, cfg.seed, stage)
    return moved


def tmcmc_sample(prior_sampler, log_prior, log_likelihood, cfg: TmcmcConfig,
                 trace_path: str | Path | None = None) -> TmcmcResult:
    """Run the full tempering schedule and estimate the log evidence.

    ``prior_sampler(rng, n)`` draws i.i.d. prior samples; ``log_prior`` and
    ``log_likelihood`` map an (n, dim) matrix to (n,) values.  The evidence
    estimate is the sum over stages of the log mean incremental weight.
    """
    rng0 = stream(cfg.seed, "tmcmc", "prior")
    samples = np.asarray(prior_sampler(rng0, cfg.n_samples), dtype=np.float64)
    if samples.ndim != 2 or samples.shape[0] != cfg.n_samples:
        raise ValueError("prior_sampler must return an (n_samples, dim) matrix")
    loglikes = np.asarray(log_likelihood(samples), dtype=np.float64)
    logpriors = np.asarray(log_prior(samples), dtype=np.float64)
    if not np.all(np.isfinite(logpriors)):
        raise TmcmcError("log_prior not finite at prior samples")

    beta = 0.0
    log_evidence = 0.0
    stages: list[StageInfo] = []
    trace_fh = open(trace_path, "w") if trace_path is not None else None
    try:
        for stage in range(1, cfg.max_stages + 1):
            new_beta = select_next_beta(loglikes, beta, cfg.target_cov)
            d_beta = new_beta - beta
            logw = d_beta * loglikes
            log_mean_w = float(logsumexp(logw) - np.log(cfg.n_samples))
            if not np.isfinite(log_mean_w):
                raise TmcmcError(f"degenerate stage at beta={new_beta}: "
                                 "all incremental weights vanished")
            log_evidence += log_mean_w

            norm = np.exp(logw - logsumexp(logw))
            cov = _weighted_covariance(samples, norm)
            chol = _proposal_cholesky(cov, cfg.proposal_scale)

            rng = stream(cfg.seed, "tmcmc", "resample", stage)
            idx = rng.choice(cfg.n_samples, size=cfg.n_samples, p=norm)
            samples = samples[idx].copy()
            loglikes = loglikes[idx].copy()
            logpriors = logpriors[idx].copy()

            # MH at the new temperature, tracking prior/likelihood separately
            # so the next stage reuses the likelihood values
            acc_rate = 0.0
            if cfg.n_mh_steps > 0:
                n, dim = samples.shape
                cur_logp = logpriors + new_beta * loglikes
                gens = [stream(cfg.seed, "tmcmc", "mh", stage, c) for c in range(n)]
                accepted = 0
                for _ in range(cfg.n_mh_steps):
                    eps = np.empty((n, dim))
                    logu = np.empty(n)
                    for c, g in enumerate(gens):
                        eps[c] = g.standard_normal(dim)
                        logu[c] = np.log(g.random())
                    proposals = samples + eps @ chol.T
                    prop_lp = np.asarray(log_prior(proposals), dtype=np.float64)
                    prop_ll = np.asarray(log_likelihood(proposals), dtype=np.float64)
                    accept = logu < (prop_lp + new_beta * prop_ll) - cur_logp
                    samples[accept] = proposals[accept]
                    logpriors[accept] = prop_lp[accept]
                    loglikes[accept] = prop_ll[accept]
                    cur_logp[accept] = prop_lp[accept] + new_beta * prop_ll[accept]
                    accepted += int(accept.sum())
                acc_rate = accepted / (n * cfg.n_mh_steps)

            stages.append(StageInfo(new_beta, log_mean_w, acc_rate))
            if trace_fh is not None:
                trace_fh.write(json.dumps({"stage": stage, "beta": new_beta,
                                           "acc_rate": acc_rate,
                                           "log_mean_weight": log_mean_w}) + "\n")
            beta = new_beta
            if beta >= 1.0:
                break
    finally:
        if trace_fh is not None:
            trace_fh.close()

    reached = beta >= 1.0
    return TmcmcResult(samples=samples, log_evidence=float(log_evidence),
                       stages=stages, reached_beta_one=reached,
                       final_loglikes=loglikes)
