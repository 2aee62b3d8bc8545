"""Gaussian approximation of likelihood times known prior at a mode.

A quasi-Newton ascent locates the mode, the Hessian comes from central
finite differences of the analytic gradient, and the negative inverse
Hessian becomes the covariance.  Wrapping the result as a single-kernel
mixture and handing it to the ARD evidence optimizer recovers classic
sparse Bayesian learning on top of the local Gaussian.

Parameters with exactly vanishing curvature at the mode (a disconnected
neuron makes its incoming weight and bias drop out of the output) are not
identifiable there; they get a flagged unit-variance placeholder and are
decoupled from the rest, mirroring how such rows are conventionally
reported.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .gmm import GaussianKernel, Gmm
from .network import ParamVector


class MapNotConverged(RuntimeError):
    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


@dataclass(frozen=True)
class MapConfig:
    grad_tol: float = 1e-6
    max_iter: int = 2000
    bounds: tuple[float, float] | None = None   # optional box on every parameter
    method: str = "bfgs"                        # "bfgs" | "newton"

    def __post_init__(self):
        if self.method not in ("bfgs", "newton"):
            raise ValueError("method must be 'bfgs' or 'newton'")


@dataclass
class LaplaceFit:
    phi_map: np.ndarray
    hessian: np.ndarray                 # -grad^2 log target at the mode
    sigma: np.ndarray                   # its (regularized) inverse
    converged: bool
    mode_seed: np.ndarray
    placeholder_idx: list[int] = field(default_factory=list)
    regularized: bool = False


def find_map(log_target, grad, start, cfg: MapConfig = MapConfig()) -> np.ndarray:
    """Local maximizer of ``log_target`` by quasi-Newton ascent.

    ``grad`` is the analytic gradient.  Raises MapNotConverged (with the
    best iterate attached) when the max-norm gradient tolerance is not met.
    """
    x0 = np.asarray(getattr(start, "values", start), dtype=np.float64).copy()

    if cfg.method == "newton":
        return _find_map_newton(log_target, grad, x0, cfg)
    neg = lambda v: -float(log_target(v))
    ngrad = lambda v: -np.asarray(grad(v), dtype=np.float64)
    if cfg.bounds is not None:
        lo, hi = cfg.bounds
        res = minimize(neg, x0, jac=ngrad, method="L-BFGS-B",
                       bounds=[(lo, hi)] * x0.size,
                       options={"maxiter": cfg.max_iter, "ftol": 1e-16,
                                "gtol": 1e-2 * cfg.grad_tol})
    else:
        res = minimize(neg, x0, jac=ngrad, method="BFGS",
                       options={"maxiter": cfg.max_iter,
                                "gtol": 1e-2 * cfg.grad_tol})
    x = np.asarray(res.x, dtype=np.float64)
    if _projected_grad_norm(grad, x, cfg) >= cfg.grad_tol:
        # quasi-Newton can stall just above the tolerance; polish with a few
        # curvature-aware steps from its endpoint
        try:
            x = _find_map_newton(log_target, grad, x, cfg)
        except MapNotConverged as err:
            best = err.best
            raise MapNotConverged(
                f"gradient max-norm {_projected_grad_norm(grad, best, cfg):.3e} "
                f"above tolerance {cfg.grad_tol:g}", best=best) from None
    return x


def _projected_grad_norm(grad, x: np.ndarray, cfg: MapConfig) -> float:
    g = np.asarray(grad(x), dtype=np.float64).copy()
    if cfg.bounds is not None:
        lo, hi = cfg.bounds
        g[(x <= lo) & (g > 0)] = 0.0
        g[(x >= hi) & (g < 0)] = 0.0
    return float(np.max(np.abs(g)))


def _find_map_newton(log_target, grad, x0, cfg: MapConfig) -> np.ndarray:
    """Trust-region Newton ascent with a finite-difference Hessian."""
    from .trustregion import TrustRegionConfig, maximize

    def fun(v):
        return float(log_target(v)), np.asarray(grad(v), dtype=np.float64), \
            hessian_fd(grad, v)

    lo, hi = cfg.bounds if cfg.bounds is not None else (-np.inf, np.inf)
    out = maximize(fun, x0, np.full(x0.size, lo), np.full(x0.size, hi),
                   TrustRegionConfig(grad_tol=cfg.grad_tol,
                                     max_iter=cfg.max_iter,
                                     initial_radius=1e3, max_radius=1e6))
    if not out.converged:
        raise MapNotConverged("trust-region Newton ascent did not reach the "
                              "gradient tolerance", best=out.x)
    return out.x


def hessian_fd(grad, x: np.ndarray, rel_step: float = 1e-4) -> np.ndarray:
    """Symmetrized central finite differences of an analytic gradient."""
    x = np.asarray(x, dtype=np.float64)
    n = x.size
    h = rel_step * np.maximum(1.0, np.abs(x))
    cols = np.empty((n, n))
    for i in range(n):
        xp, xm = x.copy(), x.copy()
        xp[i] += h[i]
        xm[i] -= h[i]
        cols[:, i] = (np.asarray(grad(xp)) - np.asarray(grad(xm))) / (2 * h[i])
    return 0.5 * (cols + cols.T)


def laplace_fit(log_target, grad, start, cfg: MapConfig = MapConfig()) -> LaplaceFit:
    """Mode, curvature and covariance of the target around one mode."""
    start_arr = np.asarray(getattr(start, "values", start), dtype=np.float64).copy()
    converged = True
    try:
        phi_map = find_map(log_target, grad, start_arr, cfg)
    except MapNotConverged as err:
        phi_map = err.best
        converged = False

    hess = -hessian_fd(grad, phi_map)          # curvature of -log target
    n = hess.shape[0]
    scale = max(np.max(np.abs(np.diag(hess))), 1.0)

    # unidentifiable directions: exactly flat diagonal curvature at the mode
    placeholder = [i for i in range(n) if abs(hess[i, i]) < 1e-10 * scale]
    for i in placeholder:
        hess[i, :] = 0.0
        hess[:, i] = 0.0
        hess[i, i] = 1.0                       # unit prior-dominated variance

    regularized = False
    eigvals = np.linalg.eigvalsh(hess)
    if eigvals[0] <= 0:
        bump = -eigvals[0] + 1e-8 * max(np.trace(hess), 1.0) / n
        hess = hess + bump * np.eye(n)
        regularized = True
    sigma = np.linalg.inv(hess)
    sigma = 0.5 * (sigma + sigma.T)
    return LaplaceFit(phi_map=phi_map, hessian=hess, sigma=sigma,
                      converged=converged, mode_seed=start_arr,
                      placeholder_idx=placeholder, regularized=regularized)


def laplace_kernel(fit: LaplaceFit) -> Gmm:
    """The fit as a single-kernel mixture, ready for the ARD evidence machinery."""
    if not fit.converged:
        raise MapNotConverged("cannot build a Laplace kernel from an "
                              "unconverged fit", best=fit.phi_map)
    return Gmm([GaussianKernel(1.0, fit.phi_map, fit.sigma)])


def laplace_table(fit: LaplaceFit, layout, nsbl_result=None, partition=None) -> list[dict]:
    """Per-parameter report rows: mode/variance, plus post-pruning moments.

    With an NSBL result attached the rows carry the hyperparameter MAP, the
    relevance and the shifted posterior moments of the (single) kernel.
    """
    rows = []
    names = layout.names if hasattr(layout, "names") else list(layout)
    for i, name in enumerate(names):
        row = {"name": name,
               "phi_map": float(fit.phi_map[i]),
               "sigma_ii": float(fit.sigma[i, i]),
               "placeholder": i in fit.placeholder_idx}
        rows.append(row)
    if nsbl_result is not None:
        ard = list(partition.ard_set)
        cond_mu = nsbl_result.posterior.kernels[0].mu
        cond_sig = nsbl_result.posterior.kernels[0].sigma
        for pos, idx in enumerate(ard):
            rows[idx]["log_alpha_map"] = float(nsbl_result.log_alpha_map.log_alpha[pos])
            rows[idx]["gamma_rms"] = float(nsbl_result.gamma_rms[pos])
            rows[idx]["classification"] = nsbl_result.classification[pos]
        for i in range(len(rows)):
            rows[i]["m_i"] = float(cond_mu[i])
            rows[i]["P_ii"] = float(cond_sig[i, i])
    return rows
