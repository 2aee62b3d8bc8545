"""Sparse Bayesian learning for shallow neural networks.

Evidence-driven pruning of network weights via automatic relevance
determination over a Gaussian-mixture surrogate of likelihood times known
prior, with transitional-MCMC, hierarchical-Bayes and Laplace baselines on
a reproducible regression study.
"""

__version__ = "0.1.0"

from .config import RunConfig, load_config, parse_config, save_config
from .data import Dataset, boxcar_truth, generate_boxcar_dataset
from .gmm import GaussianKernel, Gmm, fit_gmm, gmm_logpdf
from .hierarchical import HierConfig, joint_log_posterior, run_hierarchical
from .laplace import LaplaceFit, MapConfig, find_map, laplace_fit, laplace_kernel
from .network import (NetworkSpec, ParamLayout, ParamVector, forward,
                      forward_batch, layout_for, log_likelihood)
from .nsbl import (AlphaVector, Hyperprior, KernelConditional, NsblResult,
                   classify_relevance, kernel_conditional, log_evidence,
                   objective, objective_grad, objective_hess, optimize_alpha,
                   posterior_gmm, relevance_indicators, sample_posterior)
from .pipelines import emit_surface, run_config
from .predict import PredictiveFan, extrapolation_metrics, push_forward
from .priors import FlatBox, GaussianPrior, PriorSpec, all_ard, all_flat_box, log_prior
from .tmcmc import (TmcmcConfig, TmcmcResult, metropolis_stage, select_next_beta,
                    tmcmc_sample)

__all__ = [
    "AlphaVector", "Dataset", "FlatBox", "GaussianKernel", "GaussianPrior",
    "Gmm", "HierConfig", "Hyperprior", "KernelConditional", "LaplaceFit",
    "MapConfig", "NetworkSpec", "NsblResult", "ParamLayout", "ParamVector",
    "PredictiveFan", "PriorSpec", "RunConfig", "TmcmcConfig", "TmcmcResult",
    "all_ard", "all_flat_box", "boxcar_truth", "classify_relevance",
    "emit_surface", "extrapolation_metrics", "find_map", "fit_gmm", "forward",
    "forward_batch", "generate_boxcar_dataset", "gmm_logpdf",
    "joint_log_posterior", "kernel_conditional", "laplace_fit",
    "laplace_kernel", "layout_for", "load_config", "log_evidence",
    "log_likelihood", "log_prior", "metropolis_stage", "objective",
    "objective_grad", "objective_hess", "optimize_alpha", "parse_config",
    "posterior_gmm", "push_forward", "relevance_indicators", "run_config",
    "run_hierarchical", "sample_posterior", "save_config", "select_next_beta",
    "tmcmc_sample", "__version__",
]
