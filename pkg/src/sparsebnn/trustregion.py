"""Dogleg trust-region Newton ascent on a box.

Maximization is framed as minimizing the negative objective.  When the
(negated) Hessian is not positive definite the dogleg path degenerates to
the Cauchy point, so indefinite curvature never blocks progress.  Trial
points are projected onto the box before evaluation; a step is accepted
only when the objective actually improves, which makes the accepted-值
trace monotone by construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class TrustRegionConfig:
    grad_tol: float = 1e-6        # max-norm of the gradient
    min_radius: float = 1e-10
    max_radius: float = 10.0
    initial_radius: float = 1.0
    max_iter: int = 100
    shrink: float = 0.25
    grow: float = 2.0
    accept_ratio: float = 1e-4


@dataclass
class TrustRegionOutcome:
    x: np.ndarray
    value: float
    grad: np.ndarray
    converged: bool
    n_iter: int
    trace: list = field(default_factory=list)       # objective at accepted iterates
    x_trace: list = field(default_factory=list)     # accepted iterates


def dogleg_step(g: np.ndarray, b: np.ndarray, radius: float) -> np.ndarray:
    """Approximate minimizer of ``g.p + p.B.p/2`` within ``|p| <= radius``."""
    gnorm = np.linalg.norm(g)
    if gnorm == 0:
        return np.zeros_like(g)
    g_b_g = float(g @ b @ g)
    newton = None
    try:
        low = np.linalg.cholesky(b)
        newton = -np.linalg.solve(low.T, np.linalg.solve(low, g))
    except np.linalg.LinAlgError:
        pass
    if newton is not None and np.linalg.norm(newton) <= radius:
        return newton
    if g_b_g <= 0:
        # negative curvature along the gradient: go to the boundary
        return -(radius / gnorm) * g
    cauchy = -(gnorm ** 2 / g_b_g) * g
    c_norm = np.linalg.norm(cauchy)
    if newton is None or c_norm >= radius:
        if c_norm >= radius:
            return -(radius / gnorm) * g
        return cauchy
    # interpolate from the Cauchy point to the Newton point out to the boundary
    d = newton - cauchy
    a = float(d @ d)
    bb = 2.0 * float(cauchy @ d)
    c = float(cauchy @ cauchy) - radius ** 2
    tau = (-bb + np.sqrt(max(bb * bb - 4 * a * c, 0.0))) / (2 * a)
    return cauchy + np.clip(tau, 0.0, 1.0) * d


def maximize(fun, x0: np.ndarray, lo: np.ndarray, hi: np.ndarray,
             cfg: TrustRegionConfig = TrustRegionConfig()) -> TrustRegionOutcome:
    """Trust-region Newton ascent of ``fun`` over ``[lo, hi]``.

    ``fun(x)`` must return ``(value, gradient, hessian)``.
    """
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)
    x = np.clip(np.asarray(x0, dtype=np.float64).copy(), lo, hi)
    value, grad, hess = fun(x)
    radius = cfg.initial_radius
    trace = [value]
    x_trace = [x.copy()]
    converged = False
    it = 0
    for it in range(1, cfg.max_iter + 1):
        # at an interior optimum the gradient vanishes; on the boundary only
        # the inward component has to
        free_grad = grad.copy()
        free_grad[(x <= lo) & (grad < 0)] = 0.0
        free_grad[(x >= hi) & (grad > 0)] = 0.0
        if np.max(np.abs(free_grad), initial=0.0) < cfg.grad_tol:
            converged = True
            break
        if radius < cfg.min_radius:
            break

        step = dogleg_step(-grad, -hess, radius)
        x_new = np.clip(x + step, lo, hi)
        p = x_new - x
        pred = float(grad @ p + 0.5 * p @ hess @ p)   # predicted objective gain
        if pred <= 0 or not np.all(np.isfinite(x_new)):
            radius *= cfg.shrink
            continue
        value_new, grad_new, hess_new = fun(x_new)
        actual = value_new - value
        ratio = actual / pred
        if ratio < 0.25:
            radius *= cfg.shrink
        elif ratio > 0.75 and np.linalg.norm(p) >= 0.99 * radius:
            radius = min(cfg.grow * radius, cfg.max_radius)
        if ratio > cfg.accept_ratio and actual > 0:
            x, value, grad, hess = x_new, value_new, grad_new, hess_new
            trace.append(value)
            x_trace.append(x.copy())
    return TrustRegionOutcome(x=x, value=value, grad=grad, converged=converged,
                              n_iter=it, trace=trace, x_trace=x_trace)
