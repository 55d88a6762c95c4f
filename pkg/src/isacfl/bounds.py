"""Convergence-gap calculus for sensing-fed federated averaging.

Pure numeric evaluators for the analytical quantities the allocator and
simulator are checked against: the per-device gradient-noise bound, its
aggregate over stochastic uploads, the per-step contraction factor under
strong convexity and smoothness, and the closed-form optimality-gap bound
obtained by unrolling the one-step recursion.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ZeroEffectiveData


@dataclass(frozen=True)
class LossRegularity:
    """Strong-convexity constant, smoothness constant and learning rate.

    The gap bound requires eta <= 1/(2*L_smooth); the constructor enforces
    it together with 0 < mu <= L_smooth.
    """

    mu: float
    L_smooth: float
    eta: float

    def __post_init__(self) -> None:
        if not 0 < self.mu <= self.L_smooth:
            raise ValueError("need 0 < mu <= L_smooth")
        if not 0 < self.eta <= 1.0 / (2.0 * self.L_smooth) * (1 + 1e-12):
            raise ValueError("need 0 < eta <= 1/(2*L_smooth)")


@dataclass(frozen=True)
class NoiseModel:
    """Gradient-noise constant and non-IID divergence bound.

    sigma0_sq can be given directly, fitted from the gradient-variance
    probe, or derived from its constituents via `from_parts`.
    """

    sigma0_sq: float
    zeta_sq: float = 0.0

    def __post_init__(self) -> None:
        if self.sigma0_sq < 0 or self.zeta_sq < 0:
            raise ValueError("noise constants must be non-negative")

    @classmethod
    def from_parts(cls, L_x: float, E_xi_sq: float, c0: float,
                   gamma_max: float, zeta_sq: float = 0.0) -> "NoiseModel":
        """sigma0_sq = 2*L_x^2*E||xi||^2 + 2*c0*gamma_max.

        L_x is the input-Lipschitz constant of the gradient, E_xi_sq the
        mean squared sample norm, c0 the plain SGD variance constant and
        gamma_max the largest achievable sensing SNR.
        """
        return cls(sigma0_sq=2.0 * L_x ** 2 * E_xi_sq + 2.0 * c0 * gamma_max,
                   zeta_sq=zeta_sq)


def gradient_noise_bound(gamma_s: float, D: int, nm: NoiseModel) -> float:
    """Variance bound sigma0^2 / (D * gamma_s) for one device's gradient."""
    if gamma_s <= 0:
        raise ValueError("gamma_s must be positive")
    if D < 1:
        raise ValueError("D must be >= 1")
    return nm.sigma0_sq / (D * gamma_s)


def aggregated_noise_bound(gamma_min: float, dq_pairs: Sequence[tuple[float, float]],
                           K: int, nm: NoiseModel) -> float:
    """Variance bound for the success-weighted aggregate of K noisy gradients.

    (sigma0^2 / gamma_min) * K / sum_k D_k q_k.

    Raises:
        ZeroEffectiveData: if the success-weighted sample mass is zero.
    """
    if gamma_min <= 0:
        raise ValueError("gamma_min must be positive")
    total = sum(d * q for d, q in dq_pairs)
    if total <= 0:
        raise ZeroEffectiveData("sum of D_k * q_k is zero")
    return nm.sigma0_sq / gamma_min * K / total


def surrogate_objective(gamma_min: float, dq_pairs: Sequence[tuple[float, float]],
                        K: int, nm: NoiseModel) -> float:
    """Resource-dependent dominant term of the gap bound.

    Named alias of `aggregated_noise_bound`: minimizing it is what the
    allocator's gamma_t * sum D_k q_k maximization achieves.
    """
    return aggregated_noise_bound(gamma_min, dq_pairs, K, nm)


def contraction_factor(reg: LossRegularity) -> float:
    """Per-step factor A = 1 - 2*mu*eta + 2*L*mu*eta^2, inside (0, 1)."""
    return 1.0 - 2.0 * reg.mu * reg.eta + 2.0 * reg.L_smooth * reg.mu * reg.eta ** 2


def default_rho_bar(dq_pairs: Sequence[tuple[float, float]]) -> np.ndarray:
    """Expected aggregation weights D_k q_k / sum_j D_j q_j."""
    dq = np.array([d * q for d, q in dq_pairs], dtype=float)
    total = dq.sum()
    if total <= 0:
        raise ZeroEffectiveData("sum of D_k * q_k is zero")
    return dq / total


def empirical_rho_bar(dq_pairs: Sequence[tuple[float, float]], n_draws: int,
                      rng: np.random.Generator) -> np.ndarray:
    """Monte-Carlo E[rho_k] under Bernoulli uploads, skipping empty rounds.

    Diagnostic companion to `default_rho_bar`, which uses the ratio-of-
    expectations approximation; the two are close but not equal.
    """
    D = np.array([d for d, _ in dq_pairs], dtype=float)
    q = np.array([qk for _, qk in dq_pairs], dtype=float)
    acc = np.zeros_like(D)
    for _ in range(n_draws):
        c = rng.random(D.shape) < q
        w = (D * c).sum()
        if w > 0:
            acc += D * c / w
    return acc / n_draws


def optimality_gap_bound(t: int, gap0: float, reg: LossRegularity, nm: NoiseModel,
                         gamma_min: float, dq_pairs: Sequence[tuple[float, float]],
                         K: int | None = None,
                         rho_bar: Sequence[float] | None = None) -> float:
    """Closed-form bound on E[F(w_t) - F*] after t aggregation steps.

    A^t * gap0 + (2*L*eta^2*(1-A^t)/(1-A)) * (aggregated noise + zeta^2 *
    sum rho_bar^2). rho_bar defaults to the success-weighted data shares.
    """
    if t < 0:
        raise ValueError("t must be >= 0")
    if gap0 < 0:
        raise ValueError("gap0 must be >= 0")
    K = len(dq_pairs) if K is None else K
    rho = default_rho_bar(dq_pairs) if rho_bar is None else np.asarray(rho_bar, dtype=float)
    A = contraction_factor(reg)
    noise = aggregated_noise_bound(gamma_min, dq_pairs, K, nm) + nm.zeta_sq * float(np.sum(rho ** 2))
    a_t = A ** t
    return a_t * gap0 + 2.0 * reg.L_smooth * reg.eta ** 2 * (1.0 - a_t) / (1.0 - A) * noise


def gap_bound_curve(ts: Sequence[int], gap0: float, reg: LossRegularity, nm: NoiseModel,
                    gamma_min: float, dq_pairs: Sequence[tuple[float, float]],
                    K: int | None = None,
                    rho_bar: Sequence[float] | None = None) -> list[float]:
    """`optimality_gap_bound` evaluated on a list of round indices."""
    return [optimality_gap_bound(t, gap0, reg, nm, gamma_min, dq_pairs, K, rho_bar)
            for t in ts]
