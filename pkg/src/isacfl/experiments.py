"""Experiment orchestration: strategy comparison and parameter sweeps.

Jobs are pure functions of (scenario JSON, strategy, seed) with all
randomness derived from keyed streams, so a multiprocessing pool and a
serial loop produce identical CSV bytes.
"""

from __future__ import annotations

import multiprocessing
from pathlib import Path

import numpy as np

from . import allocator, channel, csvio
from .allocator import AllocationResult, split_allocation
from .errors import AllInfeasible
from .flsim.data import corrupt_at_snr, load_mnist, make_synthetic, partition
from .flsim.rng import substream
from .flsim.training import FedConfig, run_federated
from .scenario import (
    Scenario,
    extend_fleet,
    scenario_from_dict,
    scenario_model,
    scenario_to_dict,
)

RATIO_GRID_DEFAULT = [round(0.1 * i, 1) for i in range(1, 10)]


def build_dataset(sc: Scenario):
    d = sc.data
    if d.dataset == "synthetic":
        return make_synthetic(d.n_train, d.n_test, d.feature_dim, d.num_classes,
                              d.class_sep, seed=d.data_seed)
    if d.dataset.startswith("mnist:"):
        train, test = load_mnist(d.dataset.split(":", 1)[1], d.n_train, d.n_test)
        if train.feature_dim != d.feature_dim:
            raise ValueError(
                f"config feature_dim {d.feature_dim} != dataset {train.feature_dim}")
        return train, test
    raise ValueError(f"unknown dataset {d.dataset!r}")


def allocate_scenario(sc: Scenario, strategy: str | None = None) -> AllocationResult:
    return allocator.allocate(sc.devices, sc.system, strategy or sc.strategy,
                              sc.search)


def device_training_sets(sc: Scenario, result: AllocationResult, seed: int,
                         train_ds):
    """Partition, then corrupt each device's distinct samples once.

    Returns (X list, y list, D list, q list) over feasible devices; sample
    budgets beyond the pool reuse acquisitions via resampling.
    """
    entries = [e for e in result.per_device if e is not None]
    D = [ld.D for _, ld in entries]
    q = [ld.q for _, ld in entries]
    gammas = [ld.gamma_s for _, ld in entries]
    part = partition(train_ds, D, sc.data.partition_mode,
                     substream(seed, "partition"),
                     shards_per_device=sc.data.shards_per_device,
                     allow_resample=True)
    dev_X, dev_y = [], []
    for k, ix in enumerate(part.indices):
        uniq, inverse = np.unique(ix, return_inverse=True)
        clean = train_ds.X[uniq]
        noisy = corrupt_at_snr(clean, gammas[k], substream(seed, "corrupt", k))
        dev_X.append(noisy[inverse])
        dev_y.append(train_ds.y[ix])
    return dev_X, dev_y, D, q


def simulate_run(sc: Scenario, result: AllocationResult, seed: int):
    """One federated run for an allocation; returns the round logs."""
    train_ds, test_ds = build_dataset(sc)
    model = scenario_model(sc)
    dev_X, dev_y, D, q = device_training_sets(sc, result, seed, train_ds)
    cfg = FedConfig(rounds=sc.training.rounds, local_steps=sc.training.local_steps,
                    eta=sc.training.lr, batch_size=sc.training.batch_size)
    cap = min(sc.training.test_eval_cap, len(test_ds))
    return run_federated(model, dev_X, dev_y, D, q, cfg, seed,
                         test_ds.X[:cap], test_ds.y[:cap],
                         loss_eval_cap=sc.training.loss_eval_cap)


def _compare_job(args):
    sc_dict, strategy, seed = args
    sc = scenario_from_dict(sc_dict)
    result = allocate_scenario(sc, strategy)
    logs = simulate_run(sc, result, seed)
    return csvio.rounds_rows(strategy, seed, logs)


def _pool_map(fn, jobs_args, jobs: int):
    if jobs <= 1 or len(jobs_args) <= 1:
        return [fn(a) for a in jobs_args]
    with multiprocessing.Pool(processes=jobs) as pool:
        return pool.map(fn, jobs_args)


def run_compare(sc: Scenario, out_dir: str | Path, jobs: int = 1,
                strategies: list[str] | None = None) -> dict[str, Path]:
    """All strategies through the allocator and the simulator, all seeds.

    Writes allocation_compare.csv (per-device link quantities per
    strategy) and learning_curves.csv (one row per strategy/seed/round).
    Strategies with no feasible device are recorded with all rows flagged
    infeasible and skipped in simulation.
    """
    out_dir = Path(out_dir)
    strategies = strategies or list(allocator.STRATEGIES)
    alloc_rows, sim_args = [], []
    sc_dict = scenario_to_dict(sc)
    for strategy in strategies:
        try:
            result = allocate_scenario(sc, strategy)
        except AllInfeasible:
            alloc_rows += [[strategy, k] + [""] * 8 + [False]
                           for k in range(sc.K)]
            continue
        alloc_rows += csvio.allocation_rows(result, sc.devices, sc.system)
        sim_args += [(sc_dict, strategy, seed) for seed in sc.seeds]

    curve_rows = []
    for rows in _pool_map(_compare_job, sim_args, jobs):
        curve_rows += rows

    paths = {
        "allocation": out_dir / "allocation_compare.csv",
        "curves": out_dir / "learning_curves.csv",
    }
    csvio.write_csv(paths["allocation"], csvio.ALLOCATION_HEADER, alloc_rows)
    csvio.write_csv(paths["curves"], csvio.ROUNDS_HEADER, curve_rows)
    return paths


def ratio_allocation(sc: Scenario, ratio: float) -> AllocationResult:
    """Energy-split allocation for one communication share.

    Snapshot counts are chosen once at the midpoint split and pinned, so
    along a ratio sweep the sensing SNR falls and the upload success rises
    monotonically by construction.
    """
    base = split_allocation(sc.devices, sc.system, 0.5)
    pins = [e[0].Ls if e is not None else None for e in base.per_device]
    return split_allocation(sc.devices, sc.system, ratio, Ls_pinned=pins)


def _sweep_ratio_job(args):
    sc_dict, ratio, mode, seed = args
    sc = scenario_from_dict(sc_dict)
    sc.data.partition_mode = mode
    result = ratio_allocation(sc, ratio)
    logs = simulate_run(sc, result, seed)
    q_avg = float(np.mean([e[1].q for e in result.per_device if e is not None]))
    g_min = result.min_gamma_s()
    return [["comm_energy_ratio", ratio, mode, f"split_{ratio:g}", seed,
             logs[-1].accuracy, q_avg, g_min, float(channel.to_db(g_min))]]


def _sweep_devices_job(args):
    sc_dict, K, strategy, seed = args
    sc = scenario_from_dict(sc_dict)
    sc.devices = extend_fleet(sc, K)
    try:
        result = allocate_scenario(sc, strategy)
    except AllInfeasible:
        return []
    logs = simulate_run(sc, result, seed)
    q_avg = float(np.mean([e[1].q for e in result.per_device if e is not None]))
    g_min = result.min_gamma_s()
    return [["devices", K, sc.data.partition_mode, strategy, seed,
             logs[-1].accuracy, q_avg, g_min, float(channel.to_db(g_min))]]


def run_sweep(sc: Scenario, param: str, grid: list[float] | None,
              out_dir: str | Path, jobs: int = 1,
              modes: list[str] | None = None) -> Path:
    """Grid sweep: communication energy share or device count.

    The ratio sweep runs the pinned-snapshot split allocation under both
    IID and non-IID partitions; the device sweep runs all four strategies
    per fleet size.
    """
    out_dir = Path(out_dir)
    sc_dict = scenario_to_dict(sc)
    if param in ("comm_energy_ratio", "comm-energy-ratio"):
        grid = [float(g) for g in (grid or RATIO_GRID_DEFAULT)]
        modes = modes or ["iid", "noniid"]
        args = [(sc_dict, r, mode, seed)
                for r in grid for mode in modes for seed in sc.seeds]
        results = _pool_map(_sweep_ratio_job, args, jobs)
    elif param == "devices":
        grid_k = [int(g) for g in (grid or [3, 5, 7, 9, 11, 13, 15])]
        args = [(sc_dict, K, strategy, seed)
                for K in grid_k for strategy in allocator.STRATEGIES
                for seed in sc.seeds]
        results = _pool_map(_sweep_devices_job, args, jobs)
    else:
        raise ValueError(f"unknown sweep parameter {param!r}")
    rows = [row for chunk in results for row in chunk]
    path = out_dir / "sweep.csv"
    csvio.write_csv(path, csvio.SWEEP_HEADER, rows)
    return path
