"""Two-layer sensing/communication resource allocator and baselines.

The proposed strategy maximizes gamma_t * W(gamma_t), where gamma_t is a
floor on every device's sensing SNR and W(gamma_t) is the best achievable
sum of success-weighted sample counts under that floor. The outer layer is
a golden-section search over gamma_t; the inner layer solves each device
independently by enumerating the snapshot count, with the two transmit
powers in closed form: sensing power sits at the SNR floor (or the lower
power bound) and communication power soaks up the remaining energy.

Three reference strategies fix one power at its maximum (MaxSensing,
MaxComm) or split the post-training energy between the two roles
(Uniform); the unfixed quantities follow the same residual-energy rule so
the strategies differ only in the fixed variable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import channel
from .channel import Allocation, DeviceParams, LinkDerived, SystemParams
from .errors import AllInfeasible, DegenerateInterval

PHI = (1.0 + math.sqrt(5.0)) / 2.0

# Slack for power-bound comparisons at the edge of the search interval,
# where ps = gamma/(A*Ls) can land on ps_max up to rounding.
_BOUND_TOL = 1e-12

PROPOSED = "proposed"
MAX_SENSING = "max_sensing"
MAX_COMM = "max_comm"
UNIFORM = "uniform"
STRATEGIES = (PROPOSED, MAX_SENSING, MAX_COMM, UNIFORM)


@dataclass(frozen=True)
class SearchConfig:
    """Golden-section termination: absolute interval width and iteration cap.

    tol=None resolves to 1e-3 times the initial interval width.
    """

    tol: float | None = None
    max_iter: int = 200

    def __post_init__(self) -> None:
        if self.tol is not None and self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")


@dataclass
class SearchStats:
    """Work accounting for one optimizer run.

    n_iterations counts interval shrinks; n_probes counts evaluations of
    W(gamma) during the search (shrinks plus the two initial bracket
    points); n_candidate_evals counts snapshot candidates examined, which
    is n_probes * K * Ls_max by construction. The final re-solve at
    gamma_star is excluded.
    """

    gamma_lb: float
    gamma_ub: float
    tol: float
    n_iterations: int = 0
    n_probes: int = 0
    n_candidate_evals: int = 0


@dataclass
class AllocationResult:
    """Allocations for one strategy across all devices.

    per_device holds (Allocation, LinkDerived) or None for devices with no
    feasible allocation; feasible mirrors that as booleans. gamma_star is
    the search optimum for the proposed strategy and the realized minimum
    sensing SNR for baselines; objective = gamma_star * sum(D_k * q_k).
    """

    strategy: str
    gamma_star: float
    objective: float
    per_device: list[tuple[Allocation, LinkDerived] | None]
    feasible: list[bool]
    search: SearchStats | None = field(default=None)

    def total_dq(self) -> float:
        return sum(e[1].D * e[1].q for e in self.per_device if e is not None)

    def min_gamma_s(self) -> float:
        return min(e[1].gamma_s for e in self.per_device if e is not None)

    def surrogate_value(self) -> float:
        """min_k gamma_s_k * sum_k D_k q_k over feasible devices.

        Uniform figure of merit for comparing strategies; its reciprocal is
        proportional to the dominant convergence-bound term.
        """
        return self.min_gamma_s() * self.total_dq()


def gamma_bounds(devices: list[DeviceParams], sys: SystemParams) -> tuple[float, float]:
    """Search interval for the minimum sensing SNR.

    Lower end: every device can reach it at minimum power with one
    snapshot. Upper end: the weakest device maxes out power and snapshots.

    Raises:
        DegenerateInterval: if the interval is empty or a point.
    """
    if not devices:
        raise DegenerateInterval("empty device list")
    A = [channel.sensing_gain_coefficient(d, sys) for d in devices]
    lb = sys.ps_min * min(A)
    ub = min(a * sys.ps_max * sys.Ls_max for a in A)
    if not lb < ub:
        raise DegenerateInterval(f"gamma interval [{lb:g}, {ub:g}] is degenerate")
    return lb, ub


def _uplink_q(pc: np.ndarray, dev: DeviceParams, sys: SystemParams) -> np.ndarray:
    """Vectorized upload success; same arithmetic as channel.upload_success."""
    return 1.0 - channel.outage_probability(pc, dev, sys)


def _device_grid(dev: DeviceParams, sys: SystemParams):
    """Snapshot-count grid with per-candidate sample counts."""
    Ls = np.arange(1, sys.Ls_max + 1, dtype=np.int64)
    frame_ok = Ls * dev.tau <= sys.T_s * (1.0 + 1e-12)
    D = np.zeros_like(Ls)
    D[frame_ok] = channel.samples_per_campaign(Ls[frame_ok], dev, sys)
    return Ls, D, frame_ok & (D >= 1)


def _pick_best(Ls, D, ps, pc, valid, dev, sys):
    """Evaluate D*q on the valid candidates and keep the first argmax.

    Scanning in ascending Ls with a strict ">" update means ties resolve
    to the smallest snapshot count, which maximizes D.
    """
    if not np.any(valid):
        return None
    q = _uplink_q(pc, dev, sys)
    dq = np.where(valid, D * q, -1.0)
    i = int(np.argmax(dq))
    alloc = Allocation(Ls=int(Ls[i]), ps=float(ps[i]), pc=float(pc[i]))
    A = channel.sensing_gain_coefficient(dev, sys)
    ld = LinkDerived(D=int(D[i]), gamma_s=channel.avg_sensing_snr(alloc, A),
                     q=float(q[i]), A=A)
    return alloc, ld, float(dq[i])


def solve_subproblem(gamma_t: float, dev: DeviceParams, sys: SystemParams):
    """Best (Ls, ps, pc) for one device under a sensing-SNR floor.

    For each snapshot count: sensing power is the smallest value meeting
    the floor (clamped up to ps_min, candidate dropped above ps_max);
    whatever energy remains after sensing and training goes to the upload,
    capped at pc_max and dropped when even pc_min is unaffordable. Returns
    (Allocation, LinkDerived, D*q), or None when no snapshot count works.
    """
    if gamma_t <= 0:
        raise ValueError("gamma_t must be positive")
    A = channel.sensing_gain_coefficient(dev, sys)
    Ls, D, valid = _device_grid(dev, sys)
    ps = np.maximum(sys.ps_min, gamma_t / (A * Ls))
    valid = valid & (ps <= sys.ps_max * (1.0 + _BOUND_TOL))
    ps = np.minimum(ps, sys.ps_max)
    t_up = sys.T_th - dev.T_train
    e_rem = dev.E_budget - ps * sys.T_s - sys.E_G * dev.kappa * D
    valid = valid & (e_rem > 0)
    with np.errstate(invalid="ignore"):
        pc = np.minimum(sys.pc_max, e_rem / (sys.E_G * t_up))
    valid = valid & (pc >= sys.pc_min * (1.0 - _BOUND_TOL))
    pc = np.clip(pc, sys.pc_min, sys.pc_max)
    return _pick_best(Ls, D, ps, pc, valid, dev, sys)


def _eval_gamma(gamma_t, devices, sys, stats: SearchStats | None = None):
    """W(gamma_t) with per-device solutions; infeasible devices add zero."""
    per_device, feasible, W = [], [], 0.0
    for dev in devices:
        sol = solve_subproblem(gamma_t, dev, sys)
        if stats is not None:
            stats.n_candidate_evals += sys.Ls_max
        if sol is None:
            per_device.append(None)
            feasible.append(False)
        else:
            alloc, ld, w_k = sol
            per_device.append((alloc, ld))
            feasible.append(True)
            W += w_k
    return W, per_device, feasible


def W_of_gamma(gamma_t: float, devices: list[DeviceParams], sys: SystemParams):
    """Sum of per-device optima D_k*q_k at a fixed SNR floor.

    Separable across devices; non-increasing in gamma_t.

    Raises:
        AllInfeasible: if no device can meet the floor.
    """
    W, per_device, feasible = _eval_gamma(gamma_t, devices, sys)
    if not any(feasible):
        raise AllInfeasible(f"no device is feasible at gamma_t={gamma_t:g}")
    allocs = [e[0] if e is not None else None for e in per_device]
    return W, allocs


def golden_section_max(f, a: float, b: float, tol: float, max_iter: int = 200):
    """Maximize a unimodal f on [a, b] to interval width tol.

    Reuses one interior evaluation per shrink. Returns (x_star, shrinks,
    probes) where probes = shrinks + 2 counts calls to f.
    """
    x1 = b - (b - a) / PHI
    x2 = a + (b - a) / PHI
    f1, f2 = f(x1), f(x2)
    probes = 2
    shrinks = 0
    while (b - a) >= tol and shrinks < max_iter:
        if f1 < f2:
            a, x1, f1 = x1, x2, f2
            x2 = a + (b - a) / PHI
            f2 = f(x2)
        else:
            b, x2, f2 = x2, x1, f1
            x1 = b - (b - a) / PHI
            f1 = f(x1)
        probes += 1
        shrinks += 1
    return (a + b) / 2.0, shrinks, probes


def optimize(devices: list[DeviceParams], sys: SystemParams,
             cfg: SearchConfig | None = None) -> AllocationResult:
    """Two-layer allocation: golden-section outer search, closed-form inner.

    Raises:
        DegenerateInterval: empty gamma interval.
        AllInfeasible: no device feasible at the final gamma_star.
    """
    cfg = cfg or SearchConfig()
    lb, ub = gamma_bounds(devices, sys)
    tol = cfg.tol if cfg.tol is not None else 1e-3 * (ub - lb)
    stats = SearchStats(gamma_lb=lb, gamma_ub=ub, tol=tol)

    def f(gamma):
        W, _, _ = _eval_gamma(gamma, devices, sys, stats)
        stats.n_probes += 1
        return gamma * W

    gamma_star, shrinks, _ = golden_section_max(f, lb, ub, tol, cfg.max_iter)
    stats.n_iterations = shrinks

    W, per_device, feasible = _eval_gamma(gamma_star, devices, sys)
    if not any(feasible):
        raise AllInfeasible(f"no device is feasible at gamma_star={gamma_star:g}")
    return AllocationResult(
        strategy=PROPOSED,
        gamma_star=gamma_star,
        objective=gamma_star * W,
        per_device=per_device,
        feasible=feasible,
        search=stats,
    )


def iteration_budget(lb: float, ub: float, tol: float) -> int:
    """Shrinks needed to bring ub - lb under tol at rate 1/phi."""
    if ub - lb < tol:
        return 0
    return math.ceil(math.log((ub - lb) / tol) / math.log(PHI))


def _result_from_rows(strategy, per_device, feasible) -> AllocationResult:
    if not any(feasible):
        raise AllInfeasible(f"{strategy}: no device has a feasible allocation")
    lds = [e[1] for e in per_device if e is not None]
    gamma_min = min(ld.gamma_s for ld in lds)
    total = sum(ld.D * ld.q for ld in lds)
    return AllocationResult(strategy=strategy, gamma_star=gamma_min,
                            objective=gamma_min * total,
                            per_device=per_device, feasible=feasible)


def _solve_fixed_sensing(dev, sys, ps_fixed):
    """Enumerate Ls with sensing power pinned; upload gets the residual."""
    Ls, D, valid = _device_grid(dev, sys)
    ps = np.full_like(Ls, ps_fixed, dtype=float)
    t_up = sys.T_th - dev.T_train
    e_rem = dev.E_budget - ps_fixed * sys.T_s - sys.E_G * dev.kappa * D
    valid = valid & (e_rem > 0)
    pc = np.minimum(sys.pc_max, e_rem / (sys.E_G * t_up))
    valid = valid & (pc >= sys.pc_min * (1.0 - _BOUND_TOL))
    pc = np.clip(pc, sys.pc_min, sys.pc_max)
    return _pick_best(Ls, D, ps, pc, valid, dev, sys)


def _solve_fixed_comm(dev, sys, pc_fixed):
    """Enumerate Ls with upload power pinned; sensing gets the residual."""
    Ls, D, valid = _device_grid(dev, sys)
    t_up = sys.T_th - dev.T_train
    e_rem = dev.E_budget - sys.E_G * (pc_fixed * t_up + dev.kappa * D)
    valid = valid & (e_rem > 0)
    ps = np.minimum(sys.ps_max, e_rem / sys.T_s)
    valid = valid & (ps >= sys.ps_min * (1.0 - _BOUND_TOL))
    ps = np.clip(ps, sys.ps_min, sys.ps_max)
    pc = np.full_like(ps, pc_fixed)
    return _pick_best(Ls, D, ps, pc, valid, dev, sys)


def _solve_split(dev, sys, comm_ratio, Ls_pinned=None):
    """Split post-training energy: comm_ratio to uploads, rest to sensing.

    Sensing power is the split share clamped into its bounds; upload power
    then follows the residual-energy rule so the budget always holds. With
    Ls_pinned the enumeration collapses to that single candidate.
    """
    Ls, D, valid = _device_grid(dev, sys)
    if Ls_pinned is not None:
        valid = valid & (Ls == Ls_pinned)
    t_up = sys.T_th - dev.T_train
    avail = dev.E_budget - sys.E_G * dev.kappa * D
    valid = valid & (avail > 0)
    ps = np.clip((1.0 - comm_ratio) * avail / sys.T_s, sys.ps_min, sys.ps_max)
    e_rem = dev.E_budget - ps * sys.T_s - sys.E_G * dev.kappa * D
    valid = valid & (e_rem > 0)
    pc = np.minimum(sys.pc_max, e_rem / (sys.E_G * t_up))
    valid = valid & (pc >= sys.pc_min * (1.0 - _BOUND_TOL))
    pc = np.clip(pc, sys.pc_min, sys.pc_max)
    return _pick_best(Ls, D, ps, pc, valid, dev, sys)


def _baseline(strategy, devices, sys, solver) -> AllocationResult:
    per_device, feasible = [], []
    for dev in devices:
        sol = solver(dev)
        per_device.append((sol[0], sol[1]) if sol is not None else None)
        feasible.append(sol is not None)
    return _result_from_rows(strategy, per_device, feasible)


def baseline_max_sensing(devices, sys) -> AllocationResult:
    """Every device senses at ps_max; uploads run on leftover energy."""
    return _baseline(MAX_SENSING, devices, sys,
                     lambda d: _solve_fixed_sensing(d, sys, sys.ps_max))


def baseline_max_comm(devices, sys) -> AllocationResult:
    """Every device uploads at pc_max; sensing runs on leftover energy."""
    return _baseline(MAX_COMM, devices, sys,
                     lambda d: _solve_fixed_comm(d, sys, sys.pc_max))


def baseline_uniform(devices, sys) -> AllocationResult:
    """Each device splits its post-training energy half and half."""
    return _baseline(UNIFORM, devices, sys,
                     lambda d: _solve_split(d, sys, 0.5))


def split_allocation(devices, sys, comm_ratio, Ls_pinned=None) -> AllocationResult:
    """Uniform-style allocation with an arbitrary communication share.

    Ls_pinned (one value per device, None entries re-enumerate) holds the
    snapshot choice fixed across a ratio sweep so that sensing SNR falls
    and upload success rises monotonically with the share.
    """
    if not 0.0 < comm_ratio < 1.0:
        raise ValueError("comm_ratio must lie in (0, 1)")
    per_device, feasible = [], []
    for i, dev in enumerate(devices):
        pin = None if Ls_pinned is None else Ls_pinned[i]
        sol = _solve_split(dev, sys, comm_ratio, pin)
        per_device.append((sol[0], sol[1]) if sol is not None else None)
        feasible.append(sol is not None)
    result = _result_from_rows(f"split_{comm_ratio:g}", per_device, feasible)
    return result


def allocate(devices, sys, strategy: str, cfg: SearchConfig | None = None) -> AllocationResult:
    """Dispatch one of the four strategies by name."""
    if strategy == PROPOSED:
        return optimize(devices, sys, cfg)
    if strategy == MAX_SENSING:
        return baseline_max_sensing(devices, sys)
    if strategy == MAX_COMM:
        return baseline_max_comm(devices, sys)
    if strategy == UNIFORM:
        return baseline_uniform(devices, sys)
    raise ValueError(f"unknown strategy {strategy!r}; expected one of {STRATEGIES}")
