"""Monte-Carlo validation of the optimality-gap bound on a quadratic bowl.

The gradient-noise model is synthetic and calibrated exactly to the
analytical form: each device's gradient carries additive Gaussian noise
with total variance sigma0^2 / (D_k * gamma_k). One aggregation step per
round keeps the dynamics aligned with the one-step recursion behind the
closed-form bound.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..bounds import LossRegularity, NoiseModel, gap_bound_curve
from .models import QuadraticModel
from .rng import substream
from .training import aggregate, sample_uploads


@dataclass
class QuadraticFleet:
    """Per-device sample counts, sensing SNRs and upload probabilities."""

    D: list[int]
    gamma: list[float]
    q: list[float]

    def dq_pairs(self) -> list[tuple[float, float]]:
        return [(float(d), float(qk)) for d, qk in zip(self.D, self.q)]


def run_gap_trials(model: QuadraticModel, fleet: QuadraticFleet,
                   sigma0_sq: float, eta: float, rounds: int,
                   seeds: list[int], w0: np.ndarray) -> np.ndarray:
    """Gap trajectories E-able over seeds: shape (len(seeds), rounds + 1).

    Entry [s, t] is F(w_t) - F* for seed s; column 0 is the common start.
    """
    K = len(fleet.D)
    noise_std = [
        np.sqrt(sigma0_sq / (fleet.D[k] * fleet.gamma[k]) / model.n_params)
        for k in range(K)
    ]
    gaps = np.zeros((len(seeds), rounds + 1))
    f_star = model.loss(model.w_opt)
    for s, seed in enumerate(seeds):
        w = w0.copy()
        gaps[s, 0] = model.loss(w) - f_star
        for t in range(1, rounds + 1):
            _, g_exact = model.loss_and_grad(w)
            noisy = [
                (g_exact + substream(seed, "gradnoise", t, k).normal(
                    0.0, noise_std[k], size=model.n_params),
                 fleet.D[k], c)
                for k, c in enumerate(sample_uploads(fleet.q, substream(seed, "upload", t)))
            ]
            g_agg, _, _ = aggregate(noisy)
            if g_agg is not None:
                w = w - eta * g_agg
            gaps[s, t] = model.loss(w) - f_star
    return gaps


def gap_bound_for_fleet(model: QuadraticModel, fleet: QuadraticFleet,
                        sigma0_sq: float, eta: float, ts: list[int],
                        gap0: float, zeta_sq: float = 0.0) -> list[float]:
    """Closed-form bound values at the probe rounds for this fleet."""
    reg = LossRegularity(mu=model.mu, L_smooth=model.L_smooth, eta=eta)
    nm = NoiseModel(sigma0_sq=sigma0_sq, zeta_sq=zeta_sq)
    return gap_bound_curve(ts, gap0, reg, nm, min(fleet.gamma), fleet.dq_pairs())
