"""Joint sensing/communication resource allocation for federated learning
over ISAC devices: physical-layer model, two-layer allocator with
closed-form per-device solutions, convergence-gap calculus, and a
self-contained FedAvg simulator with sensing-noise-corrupted data."""

from .allocator import (
    AllocationResult,
    SearchConfig,
    allocate,
    baseline_max_comm,
    baseline_max_sensing,
    baseline_uniform,
    gamma_bounds,
    optimize,
    solve_subproblem,
)
from .bounds import (
    LossRegularity,
    NoiseModel,
    aggregated_noise_bound,
    contraction_factor,
    gradient_noise_bound,
    optimality_gap_bound,
    surrogate_objective,
)
from .channel import (
    Allocation,
    DeviceParams,
    LinkDerived,
    SystemParams,
    avg_sensing_snr,
    energy_used,
    outage_probability,
    required_rate,
    samples_per_campaign,
    sensing_gain_coefficient,
    upload_success,
)
from .scenario import Scenario, generate_scenario, load_scenario, save_scenario

__version__ = "0.1.0"

__all__ = [
    "Allocation", "AllocationResult", "DeviceParams", "LinkDerived",
    "LossRegularity", "NoiseModel", "Scenario", "SearchConfig", "SystemParams",
    "aggregated_noise_bound", "allocate", "avg_sensing_snr",
    "baseline_max_comm", "baseline_max_sensing", "baseline_uniform",
    "contraction_factor", "energy_used", "gamma_bounds", "generate_scenario",
    "gradient_noise_bound", "load_scenario", "optimality_gap_bound", "optimize",
    "outage_probability", "required_rate", "samples_per_campaign",
    "save_scenario", "sensing_gain_coefficient", "solve_subproblem",
    "surrogate_objective", "upload_success",
]
