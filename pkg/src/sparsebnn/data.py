"""Synthetic regression data: a boxcar-like target observed under Gaussian noise.

The target is the smooth two-tanh surrogate of a rectangular pulse,
``2*tanh(5x+5) + 2*tanh(-5x+5)``, which equals the forward pass of a
1-2-1 tanh network, so the generating process is itself a member of the
model family.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .rngstream import stream

BOXCAR_TRUTH_ID = "boxcar-tanh2"

# (outer1, outer2, slope1, slope2, shift1, shift2)
_BOXCAR = (2.0, 2.0, 5.0, -5.0, 5.0, 5.0)


def boxcar_truth(x) -> np.ndarray:
    """Two-tanh boxcar surrogate evaluated at ``x``."""
    a1, a2, s1, s2, c1, c2 = _BOXCAR
    x = np.asarray(x, dtype=np.float64)
    return a1 * np.tanh(s1 * x + c1) + a2 * np.tanh(s2 * x + c2)


@dataclass
class Dataset:
    x: np.ndarray
    y: np.ndarray
    noise_var: float
    truth_fn_id: str | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=np.float64).ravel()
        self.y = np.asarray(self.y, dtype=np.float64).ravel()
        if self.x.size != self.y.size:
            raise ValueError("x and y must have equal length")
        if self.x.size < 1:
            raise ValueError("need at least one observation")
        if np.any(np.diff(self.x) <= 0):
            raise ValueError("x must be strictly increasing")
        if self.noise_var <= 0:
            raise ValueError("noise_var must be positive")

    @property
    def n(self) -> int:
        return self.x.size


def generate_boxcar_dataset(n: int, x_lo: float, x_hi: float, noise_var: float,
                            seed: int) -> Dataset:
    """Equally spaced noisy observations of the boxcar surrogate."""
    if n < 2:
        raise ValueError("need n >= 2")
    if not x_lo < x_hi:
        raise ValueError("need x_lo < x_hi")
    if noise_var <= 0:
        raise ValueError("noise_var must be positive")
    x = np.linspace(x_lo, x_hi, n)
    rng = stream(seed, "dataset", "boxcar")
    y = boxcar_truth(x) + np.sqrt(noise_var) * rng.standard_normal(n)
    meta = {"n": int(n), "x_lo": float(x_lo), "x_hi": float(x_hi),
            "noise_var": float(noise_var), "seed": int(seed),
            "truth_fn_id": BOXCAR_TRUTH_ID}
    return Dataset(x, y, noise_var, truth_fn_id=BOXCAR_TRUTH_ID, meta=meta)


def save_dataset(ds: Dataset, csv_path: str | Path) -> None:
    """Write ``x,y`` CSV plus a JSON sidecar with the generation metadata."""
    csv_path = Path(csv_path)
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "y"])
        for xi, yi in zip(ds.x, ds.y):
            writer.writerow([repr(float(xi)), repr(float(yi))])
    sidecar = dict(ds.meta) if ds.meta else {}
    sidecar.setdefault("n", int(ds.n))
    sidecar.setdefault("noise_var", float(ds.noise_var))
    sidecar.setdefault("truth_fn_id", ds.truth_fn_id)
    with open(csv_path.with_suffix(".json"), "w") as fh:
        json.dump(sidecar, fh, indent=2)
        fh.write("\n")


def load_dataset(csv_path: str | Path) -> Dataset:
    csv_path = Path(csv_path)
    with open(csv_path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if [h.strip() for h in header] != ["x", "y"]:
            raise ValueError(f"expected 'x,y' header in {csv_path}, got {header}")
        rows = [(float(r[0]), float(r[1])) for r in reader if r]
    sidecar_path = csv_path.with_suffix(".json")
    meta = {}
    if sidecar_path.exists():
        with open(sidecar_path) as fh:
            meta = json.load(fh)
    noise_var = float(meta.get("noise_var", 1.0))
    x = np.array([r[0] for r in rows])
    y = np.array([r[1] for r in rows])
    return Dataset(x, y, noise_var, truth_fn_id=meta.get("truth_fn_id"), meta=meta)
