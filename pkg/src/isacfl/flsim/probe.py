"""Gradient-variance probe over sample-count and sensing-SNR grids.

For each (D, gamma) cell the probe repeatedly draws D samples from a clean
pool, corrupts them at the given SNR, and measures the squared deviation
of the resulting D-sample gradient from the clean full-pool gradient. The
cell means feed a 1/(D*gamma) fit for the gradient-noise constant and the
monotonicity checks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset, corrupt_at_snr
from .rng import substream


@dataclass
class ProbeCell:
    D: int
    gamma: float
    variance: float
    n_draws: int


def gradient_variance_probe(model, w: np.ndarray, pool: Dataset,
                            D_grid: list[int], gamma_grid: list[float],
                            n_draws: int, seed: int) -> list[ProbeCell]:
    """Measured E||g_noisy - g_clean||^2 per grid cell.

    The reference gradient is the clean full-pool gradient at w, so each
    cell captures both the sensing-noise bias and the finite-sample
    variance of a D-sample gradient estimate.
    """
    _, g_ref = model.loss_and_grad(w, pool.X, pool.y)
    cells = []
    for D in D_grid:
        for gamma in gamma_grid:
            rng = substream(seed, "probe", D, int(gamma * 1e6))
            acc = 0.0
            for _ in range(n_draws):
                idx = rng.integers(0, len(pool), size=D)
                Xn = corrupt_at_snr(pool.X[idx], gamma, rng)
                _, g = model.loss_and_grad(w, Xn, pool.y[idx])
                diff = g - g_ref
                acc += float(diff @ diff)
            cells.append(ProbeCell(D=D, gamma=float(gamma),
                                   variance=acc / n_draws, n_draws=n_draws))
    return cells


def fit_sigma0_sq_ls(cells: list[ProbeCell]) -> float:
    """Least-squares slope of variance against 1/(D*gamma), zero intercept."""
    x = np.array([1.0 / (c.D * c.gamma) for c in cells])
    v = np.array([c.variance for c in cells])
    return float((x @ v) / (x @ x))


def fit_sigma0_sq_envelope(cells: list[ProbeCell]) -> float:
    """Smallest constant with variance <= sigma0^2/(D*gamma) on every cell."""
    return max(c.variance * c.D * c.gamma for c in cells)
