"""Physical-layer and energy formulas for ISAC devices.

Every operation is a pure function of its arguments: sensing SNR under
coherent snapshot accumulation, per-campaign sample budgets, uplink
outage under exponential (Rayleigh-power) fading, and the per-device
energy ledger. Powers are watts, times seconds, energies joules, rates
bit/s; SNRs and gains are linear unless a name says dB.

Scalar arguments may be replaced by numpy arrays; results broadcast.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DelayExhausted, SnapshotTooLong

# Decimal inputs such as tau = 1e-4 are not exact in binary; this relative
# slack keeps integer ratios like 20 / (100 * 1e-4) from flooring to 1999.
_REL_EPS = 1e-12

# 2**x overflows float64 near x = 1024; beyond this the outage saturates at 1.
_MAX_RATE_RATIO = 1020.0


@dataclass(frozen=True)
class SystemParams:
    """Constants shared by all devices in a deployment.

    Attributes:
        T_s: sensing stage duration (s).
        T_th: per-round delay budget for local training plus upload (s).
        E_G: number of global rounds charged against the energy budget.
        z: model size uploaded each round (bits).
        alpha_p: large-scale pathloss exponent.
        ps_min, ps_max: sensing transmit power bounds (W).
        pc_min, pc_max: communication transmit power bounds (W).
        Ls_max: maximum number of coherently accumulated snapshots.
    """

    T_s: float
    T_th: float
    E_G: int
    z: float
    alpha_p: float
    ps_min: float
    ps_max: float
    pc_min: float
    pc_max: float
    Ls_max: int

    def __post_init__(self) -> None:
        if not 0 < self.ps_min <= self.ps_max:
            raise ValueError("need 0 < ps_min <= ps_max")
        if not 0 < self.pc_min <= self.pc_max:
            raise ValueError("need 0 < pc_min <= pc_max")
        if self.Ls_max < 1:
            raise ValueError("Ls_max must be >= 1")
        if self.T_s <= 0 or self.T_th <= 0:
            raise ValueError("T_s and T_th must be positive")
        if self.E_G < 1:
            raise ValueError("E_G must be >= 1")
        if self.z < 0:
            raise ValueError("z must be >= 0")


@dataclass(frozen=True)
class DeviceParams:
    """Per-device physical and energy constants.

    Attributes:
        tau: length of one sensing snapshot (s).
        d_target: device-to-target distance (m); round-trip pathloss.
        d_server: device-to-server distance (m); one-way pathloss.
        G: antenna gain, linear.
        omega_s: mean of the exponential sensing fading factor.
        omega_c: mean of the exponential uplink channel gain.
        sigma2_s: sensing noise power (W).
        sigma2_c: uplink noise power (W).
        B: uplink bandwidth (Hz).
        E_budget: total energy budget across the training campaign (J).
        kappa: compute energy per training sample (J).
        T_train: local training wall time per round (s).
    """

    tau: float
    d_target: float
    d_server: float
    G: float
    omega_s: float
    omega_c: float
    sigma2_s: float
    sigma2_c: float
    B: float
    E_budget: float
    kappa: float
    T_train: float

    def __post_init__(self) -> None:
        for name in (
            "tau", "d_target", "d_server", "G", "omega_s", "omega_c",
            "sigma2_s", "sigma2_c", "B", "E_budget", "kappa", "T_train",
        ):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be strictly positive")


@dataclass(frozen=True)
class Allocation:
    """Per-device decision triple: snapshots, sensing power, comm power."""

    Ls: int
    ps: float
    pc: float


@dataclass(frozen=True)
class LinkDerived:
    """Quantities derived from an allocation.

    D is the per-campaign sample count, gamma_s the average sensing SNR,
    q the upload success probability and A the sensing gain per watt per
    snapshot.
    """

    D: int
    gamma_s: float
    q: float
    A: float


def to_db(x):
    """Linear power ratio to dB."""
    return 10.0 * np.log10(x)


def from_db(x_db):
    """dB to linear power ratio (also converts antenna dBi to linear)."""
    return 10.0 ** (np.asarray(x_db, dtype=float) / 10.0)


def sensing_gain_coefficient(dev: DeviceParams, sys: SystemParams) -> float:
    """Sensing SNR per watt per snapshot: G*omega_s / (sigma2_s * d^alpha)."""
    return dev.G * dev.omega_s / (dev.sigma2_s * dev.d_target ** sys.alpha_p)


def avg_sensing_snr(alloc: Allocation, A: float) -> float:
    """Average sensing SNR A * ps * Ls (fading averaged out)."""
    return A * alloc.ps * alloc.Ls


def instantaneous_sensing_snr(alloc: Allocation, A: float, psi: float,
                              omega_s: float) -> float:
    """Sensing SNR for one fading draw psi ~ Exp(mean omega_s).

    Averages to `avg_sensing_snr` over psi.
    """
    return A * alloc.ps * alloc.Ls * (psi / omega_s)


def samples_per_campaign(Ls, dev: DeviceParams, sys: SystemParams):
    """Number of samples collected in the sensing stage: floor(T_s/(Ls*tau)).

    Raises:
        SnapshotTooLong: if a single frame Ls*tau exceeds T_s.
    """
    Ls_arr = np.asarray(Ls)
    frame = Ls_arr * dev.tau
    if np.any(frame > sys.T_s * (1.0 + _REL_EPS)):
        raise SnapshotTooLong(
            f"snapshot frame {np.max(frame):g} s exceeds sensing stage {sys.T_s:g} s"
        )
    d = np.floor(sys.T_s / frame * (1.0 + _REL_EPS)).astype(np.int64)
    return int(d) if np.isscalar(Ls) else d


def required_rate(dev: DeviceParams, sys: SystemParams) -> float:
    """Minimum uplink rate that delivers z bits inside the delay budget.

    Raises:
        DelayExhausted: if local training leaves no time for the upload.
    """
    if dev.T_train >= sys.T_th:
        raise DelayExhausted(
            f"T_train {dev.T_train:g} s >= delay budget {sys.T_th:g} s"
        )
    return sys.z / (sys.T_th - dev.T_train)


def _outage_exponent(pc, dev: DeviceParams, sys: SystemParams):
    r_ratio = min(required_rate(dev, sys) / dev.B, _MAX_RATE_RATIO)
    snr_needed = 2.0 ** r_ratio - 1.0
    pathloss = dev.d_server ** (sys.alpha_p / 2.0)
    return dev.sigma2_c * pathloss * snr_needed / (pc * dev.G * dev.omega_c)


def outage_probability(pc, dev: DeviceParams, sys: SystemParams):
    """Probability the uplink rate falls short of the required rate.

    Exponential channel gain gives 1 - exp(-c/pc) with c collecting noise,
    pathloss and the rate threshold; decreasing in pc, bounded in [0, 1).
    """
    return -np.expm1(-_outage_exponent(pc, dev, sys))


def upload_success(pc, dev: DeviceParams, sys: SystemParams):
    """Complement of `outage_probability`; q + P_out = 1 exactly."""
    return 1.0 - outage_probability(pc, dev, sys)


def energy_used(alloc: Allocation, D, dev: DeviceParams, sys: SystemParams):
    """Total energy drawn by sensing, training and uploads (J).

    Sensing runs once per campaign; training and the (always-attempted)
    upload recur for E_G rounds. The upload slot is billed at its maximum
    length T_th - T_train.
    """
    t_up = sys.T_th - dev.T_train
    return alloc.ps * sys.T_s + sys.E_G * (alloc.pc * t_up + dev.kappa * D)


def link_derived(alloc: Allocation, dev: DeviceParams, sys: SystemParams) -> LinkDerived:
    """Bundle D, gamma_s, q and A for one allocation."""
    A = sensing_gain_coefficient(dev, sys)
    return LinkDerived(
        D=samples_per_campaign(alloc.Ls, dev, sys),
        gamma_s=avg_sensing_snr(alloc, A),
        q=float(upload_success(alloc.pc, dev, sys)),
        A=A,
    )


def allocation_feasible(alloc: Allocation, dev: DeviceParams, sys: SystemParams,
                        rel_tol: float = 1e-9) -> bool:
    """Audit one allocation against snapshot, power and energy constraints."""
    if not 1 <= alloc.Ls <= sys.Ls_max:
        return False
    if not sys.ps_min * (1 - rel_tol) <= alloc.ps <= sys.ps_max * (1 + rel_tol):
        return False
    if not sys.pc_min * (1 - rel_tol) <= alloc.pc <= sys.pc_max * (1 + rel_tol):
        return False
    if alloc.Ls * dev.tau > sys.T_s * (1.0 + _REL_EPS):
        return False
    D = samples_per_campaign(alloc.Ls, dev, sys)
    return energy_used(alloc, D, dev, sys) <= dev.E_budget * (1 + rel_tol)
