"""Push-forward predictive fans.

Posterior parameter samples are mapped through the network over an
evaluation grid; the fan is the resulting matrix of curves plus columnwise
mean and empirical quantile bands.  Observation noise is off by default
(pure push-forward posterior) and can be added per draw for the full
predictive distribution.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import network
from .rngstream import stream

DEFAULT_LEVELS = (0.5, 0.95)


@dataclass
class PredictiveFan:
    x_grid: np.ndarray
    samples: np.ndarray                     # (n_draws, len(x_grid))
    mean: np.ndarray
    bands: list[tuple[float, np.ndarray, np.ndarray]]   # (level, lo, hi)
    include_noise: bool

    def band(self, level: float):
        for lvl, lo, hi in self.bands:
            if abs(lvl - level) < 1e-12:
                return lo, hi
        raise KeyError(f"no {level} band in this fan")


def push_forward(spec: network.NetworkSpec, param_samples: np.ndarray,
                 x_grid: np.ndarray, include_noise: bool = False,
                 noise_var: float = 0.0, seed: int = 0,
                 levels=DEFAULT_LEVELS) -> PredictiveFan:
    """Evaluate every parameter sample over the grid and summarize columnwise."""
    param_samples = np.asarray(param_samples, dtype=np.float64)
    if param_samples.ndim != 2 or param_samples.shape[0] == 0:
        raise ValueError("param_samples must be a non-empty (n, n_params) matrix")
    x_grid = np.asarray(x_grid, dtype=np.float64).ravel()
    curves = network.forward_batch(spec, param_samples, x_grid)
    if include_noise:
        if noise_var <= 0:
            raise ValueError("include_noise requires noise_var > 0")
        rng = stream(seed, "predict", "noise")
        curves = curves + np.sqrt(noise_var) * rng.standard_normal(curves.shape)
    mean = curves.mean(axis=0)
    bands = []
    for level in sorted(levels):
        tail = (1.0 - level) / 2.0
        lo = np.quantile(curves, tail, axis=0)
        hi = np.quantile(curves, 1.0 - tail, axis=0)
        bands.append((float(level), lo, hi))
    return PredictiveFan(x_grid=x_grid, samples=curves, mean=mean, bands=bands,
                         include_noise=include_noise)


def extrapolation_metrics(fan: PredictiveFan, truth_fn,
                          train_range: tuple[float, float]) -> dict:
    """Fit quality inside the training range vs the extrapolation region.

    Returns the RMSE of the fan mean against the truth on grid points inside
    and outside ``train_range``, and the mean 95% band width outside.
    """
    lo, hi = train_range
    inside = (fan.x_grid >= lo) & (fan.x_grid <= hi)
    if not np.any(~inside):
        raise ValueError("x_grid does not extend beyond the training range")
    truth = np.asarray(truth_fn(fan.x_grid), dtype=np.float64)
    err = fan.mean - truth
    band_lo, band_hi = fan.band(0.95)
    return {
        "rmse_in": float(np.sqrt(np.mean(err[inside] ** 2))),
        "rmse_out": float(np.sqrt(np.mean(err[~inside] ** 2))),
        "band_width_out": float(np.mean((band_hi - band_lo)[~inside])),
    }


def save_fan(fan: PredictiveFan, csv_path: str | Path,
             samples_path: str | Path | None = None) -> None:
    """Summary CSV (x, mean, per-level lo/hi) plus optional raw sample matrix."""
    csv_path = Path(csv_path)
    cols = {"x": fan.x_grid, "mean": fan.mean}
    for level, lo, hi in fan.bands:
        tag = f"{level * 100:g}".replace(".", "p")
        cols[f"q{tag}_lo"] = lo
        cols[f"q{tag}_hi"] = hi
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(cols))
        for row in zip(*cols.values()):
            writer.writerow([repr(float(v)) for v in row])
    if samples_path is not None:
        np.save(samples_path, fan.samples)


def load_fan_summary(csv_path: str | Path) -> dict[str, np.ndarray]:
    with open(csv_path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(v) for v in r] for r in reader if r]
    arr = np.asarray(rows)
    return {name: arr[:, i] for i, name in enumerate(header)}
