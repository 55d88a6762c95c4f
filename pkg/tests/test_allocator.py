"""Allocator tests: closed-form inner solutions against a brute-force grid
oracle, golden-section behavior on synthetic objectives, and the baseline
strategies."""

import math

import numpy as np
import pytest
from conftest import build_system, random_device, random_fleet

from isacfl import channel
from isacfl.allocator import (
    PHI,
    AllocationResult,
    SearchConfig,
    W_of_gamma,
    allocate,
    baseline_max_comm,
    baseline_max_sensing,
    baseline_uniform,
    gamma_bounds,
    golden_section_max,
    iteration_budget,
    optimize,
    solve_subproblem,
    split_allocation,
)
from isacfl.channel import Allocation, DeviceParams, SystemParams
from isacfl.errors import AllInfeasible, DegenerateInterval


def brute_force_subproblem(gamma_t, dev, sys, n_pc=400):
    """Grid oracle: enumerate Ls, sensing power at the SNR floor, and a
    dense communication-power grid up to the residual-energy cap."""
    A = channel.sensing_gain_coefficient(dev, sys)
    t_up = sys.T_th - dev.T_train
    best = (-1.0, None)
    for Ls in range(1, sys.Ls_max + 1):
        if Ls * dev.tau > sys.T_s * (1 + 1e-12):
            continue
        D = int(math.floor(sys.T_s / (Ls * dev.tau) * (1 + 1e-12)))
        if D < 1:
            continue
        ps = max(sys.ps_min, gamma_t / (A * Ls))
        if ps > sys.ps_max * (1 + 1e-12):
            continue
        ps = min(ps, sys.ps_max)
        e_rem = dev.E_budget - ps * sys.T_s - sys.E_G * dev.kappa * D
        if e_rem <= 0:
            continue
        pc_cap = min(sys.pc_max, e_rem / (sys.E_G * t_up))
        if pc_cap < sys.pc_min * (1 - 1e-12):
            continue
        grid = np.linspace(sys.pc_min, max(sys.pc_min, pc_cap), n_pc)
        dq = D * (1.0 - channel.outage_probability(grid, dev, sys))
        val = float(np.max(dq))
        if val > best[0]:
            best = (val, Ls)
    return best


class TestGammaBounds:
    def test_hand_values(self):
        # two devices engineered to have A = 0.05 and A = 0.02
        sys = build_system(ps_min=0.1, ps_max=2.0, Ls_max=256, alpha_p=4.0)
        devs = [
            DeviceParams(tau=1e-4, d_target=(10.0 / a) ** 0.25, d_server=25.0,
                         G=10.0, omega_s=1.0, omega_c=1.0, sigma2_s=1.0,
                         sigma2_c=2.4e-7, B=1e6, E_budget=50.0, kappa=1e-4,
                         T_train=0.1)
            for a in (0.05, 0.02)
        ]
        lb, ub = gamma_bounds(devs, sys)
        assert lb == pytest.approx(0.002, rel=1e-9)
        assert ub == pytest.approx(10.24, rel=1e-9)

    def test_degenerate(self, rng):
        sys = build_system(ps_min=1.0, ps_max=1.0, Ls_max=1)
        with pytest.raises(DegenerateInterval):
            gamma_bounds([random_device(rng)], sys)

    def test_homogeneity(self, rng):
        sys = build_system()
        devs = random_fleet(rng, 3)
        lb, ub = gamma_bounds(devs, sys)
        # scaling every A_k by c (via sigma2_s / c) scales both bounds by c
        c = 3.7
        scaled = [DeviceParams(**{**d.__dict__, "sigma2_s": d.sigma2_s / c}) for d in devs]
        lb2, ub2 = gamma_bounds(scaled, sys)
        assert lb2 == pytest.approx(c * lb, rel=1e-12)
        assert ub2 == pytest.approx(c * ub, rel=1e-12)


class TestSolveSubproblem:
    def test_power_at_snr_floor(self):
        sys = build_system(ps_min=0.1)
        # engineer A = 0.05 exactly
        dev = DeviceParams(tau=1e-4, d_target=(10.0 / 0.05) ** 0.25, d_server=25.0,
                           G=10.0, omega_s=1.0, omega_c=1.0, sigma2_s=1.0,
                           sigma2_c=2.4e-7, B=1e6, E_budget=50.0, kappa=1e-4,
                           T_train=0.1)
        sol = solve_subproblem(5.0, dev, sys)
        assert sol is not None
        alloc, ld, _ = sol
        # at whatever Ls got picked, ps must equal max(ps_min, gamma/(A*Ls))
        assert alloc.ps == pytest.approx(max(0.1, 5.0 / (0.05 * alloc.Ls)), rel=1e-12)
        assert ld.gamma_s >= 5.0 * (1 - 1e-9)

    def test_lower_clamp_everywhere(self, rng):
        sys = build_system()
        dev = random_device(rng)
        A = channel.sensing_gain_coefficient(dev, sys)
        gamma_tiny = sys.ps_min * A * 0.5  # below the floor even at Ls = 1
        sol = solve_subproblem(gamma_tiny, dev, sys)
        assert sol is not None
        assert sol[0].ps == pytest.approx(sys.ps_min)

    def test_against_grid_oracle(self, rng):
        sys = build_system(Ls_max=64)
        for _ in range(100):
            dev = random_device(rng)
            lb = sys.ps_min * channel.sensing_gain_coefficient(dev, sys)
            ub = channel.sensing_gain_coefficient(dev, sys) * sys.ps_max * sys.Ls_max
            gamma_t = float(rng.uniform(lb, ub))
            sol = solve_subproblem(gamma_t, dev, sys)
            val, ls = brute_force_subproblem(gamma_t, dev, sys)
            if sol is None:
                assert val < 0
                continue
            assert sol[2] == pytest.approx(val, rel=1e-3)
            assert sol[0].Ls == ls

    def test_monotone_clamp(self, rng):
        # raising ps above its closed-form value never increases D*q
        sys = build_system()
        for _ in range(30):
            dev = random_device(rng)
            A = channel.sensing_gain_coefficient(dev, sys)
            gamma_t = float(rng.uniform(sys.ps_min * A, A * sys.ps_max * sys.Ls_max))
            sol = solve_subproblem(gamma_t, dev, sys)
            if sol is None:
                continue
            alloc, ld, best = sol
            t_up = sys.T_th - dev.T_train
            for bump in (1.01, 1.2, 2.0):
                ps = alloc.ps * bump
                if ps > sys.ps_max:
                    continue
                e_rem = dev.E_budget - ps * sys.T_s - sys.E_G * dev.kappa * ld.D
                if e_rem <= 0:
                    continue
                pc = min(sys.pc_max, e_rem / (sys.E_G * t_up))
                if pc < sys.pc_min:
                    continue
                dq = ld.D * float(channel.upload_success(pc, dev, sys))
                assert dq <= best * (1 + 1e-12)


class TestWOfGamma:
    def test_identical_devices_scale(self, rng):
        sys = build_system()
        dev = random_device(rng)
        gamma_t = 1.0
        single = solve_subproblem(gamma_t, dev, sys)
        W, _ = W_of_gamma(gamma_t, [dev] * 4, sys)
        assert W == pytest.approx(4 * single[2], rel=1e-12)

    def test_two_device_sum(self, rng):
        sys = build_system()
        d1, d2 = random_fleet(rng, 2)
        gamma_t = 0.8
        W, _ = W_of_gamma(gamma_t, [d1, d2], sys)
        s1, s2 = solve_subproblem(gamma_t, d1, sys), solve_subproblem(gamma_t, d2, sys)
        expect = (s1[2] if s1 else 0.0) + (s2[2] if s2 else 0.0)
        assert W == pytest.approx(expect, rel=1e-12)

    def test_non_increasing_on_grid(self, rng):
        sys = build_system(Ls_max=64)
        devs = random_fleet(rng, 3)
        lb, ub = gamma_bounds(devs, sys)
        grid = np.linspace(lb, ub, 500)
        ws = []
        for g in grid:
            try:
                W, _ = W_of_gamma(float(g), devs, sys)
            except AllInfeasible:
                W = 0.0
            ws.append(W)
        ws = np.array(ws)
        assert np.all(np.diff(ws) <= 1e-9 * np.maximum(ws[:-1], 1.0))

    def test_all_infeasible(self, rng):
        sys = build_system()
        devs = random_fleet(rng, 2)
        _, ub = gamma_bounds(devs, sys)
        with pytest.raises(AllInfeasible):
            W_of_gamma(ub * 10, devs, sys)


class TestGoldenSection:
    def test_shrink_count(self):
        calls = []

        def f(x):
            calls.append(x)
            return -(x - 2.0) ** 2

        x, shrinks, probes = golden_section_max(f, 0.0, 10.0, 0.01)
        expected = math.ceil(math.log(1000.0) / math.log(PHI))
        assert abs(shrinks - expected) <= 1
        assert probes == shrinks + 2
        assert len(calls) == probes
        assert x == pytest.approx(2.0, abs=0.01)

    def test_synthetic_hinge_objective(self):
        gamma_ub = 7.0
        f = lambda g: g * max(0.0, 1.0 - g / gamma_ub)
        tol = 1e-4
        x, _, _ = golden_section_max(f, 0.0, gamma_ub, tol)
        assert x == pytest.approx(gamma_ub / 2.0, abs=tol)

    def test_slack_energy_runs_to_upper_bound(self, rng):
        # one device, energy never binds, one-snapshot frames: W constant,
        # so gamma * W pushes the search to the top of the interval
        sys = build_system(Ls_max=1)
        dev = random_device(rng, E_budget=1e9)
        cfg = SearchConfig(tol=1e-5)
        res = optimize([dev], sys, cfg)
        _, ub = gamma_bounds([dev], sys)
        assert res.gamma_star == pytest.approx(ub, abs=2e-5)


def grid_scan(devs, sys, n=500):
    """Exhaustive gamma grid: (best f anywhere, best f with all devices
    feasible). The second value is the optimum honoring the full min-SNR
    semantics; the two differ when some device drops inside the interval."""
    lb, ub = gamma_bounds(devs, sys)
    best = best_all_feasible = 0.0
    for g in np.linspace(lb, ub, n):
        try:
            W, allocs = W_of_gamma(float(g), devs, sys)
        except AllInfeasible:
            continue
        best = max(best, float(g) * W)
        if all(a is not None for a in allocs):
            best_all_feasible = max(best_all_feasible, float(g) * W)
    return best, best_all_feasible


class TestOptimize:
    def test_beats_gamma_grid_when_unimodal(self, rng):
        # long snapshots keep energy cliffs outside the search interval, so
        # the single-hump premise behind the golden section holds
        sys = build_system(Ls_max=64)
        for _ in range(10):
            devs = random_fleet(rng, int(rng.integers(1, 6)),
                                tau=float(rng.uniform(5e-4, 2e-3)))
            res = optimize(devs, sys)
            grid_best, grid_all = grid_scan(devs, sys)
            assert grid_best == grid_all  # no device drops inside the interval
            assert res.objective >= 0.995 * grid_best

    def test_beats_all_feasible_grid_with_device_drops(self, rng):
        # short snapshots put per-device energy cliffs inside the interval;
        # f develops extra humps from the dropped-device convention. The
        # search still matches the best allocation that keeps every device
        # feasible, and the dropped-device rows come back flagged.
        sys = build_system(Ls_max=64)
        for _ in range(10):
            devs = random_fleet(rng, int(rng.integers(1, 6)))
            res = optimize(devs, sys)
            _, grid_all = grid_scan(devs, sys)
            assert res.objective >= 0.995 * grid_all

    def test_complexity_accounting(self, rng):
        sys = build_system(Ls_max=64)
        for _ in range(10):
            devs = random_fleet(rng, int(rng.integers(1, 6)))
            res = optimize(devs, sys)
            st = res.search
            assert st.n_candidate_evals == st.n_probes * len(devs) * sys.Ls_max
            assert st.n_probes == st.n_iterations + 2
            assert st.n_probes <= iteration_budget(st.gamma_lb, st.gamma_ub, st.tol) + 2

    def test_tightness(self, rng):
        sys = build_system(Ls_max=64)
        for _ in range(20):
            devs = random_fleet(rng, int(rng.integers(1, 6)))
            res = optimize(devs, sys)
            a_ps = max(channel.sensing_gain_coefficient(d, sys) * sys.ps_max for d in devs)
            slack = res.search.tol * a_ps
            assert res.min_gamma_s() >= res.gamma_star * (1 - 1e-9)
            assert res.min_gamma_s() - res.gamma_star <= slack + 1e-12

    def test_feasibility_audit(self, rng):
        sys = build_system(Ls_max=64)
        for _ in range(10):
            devs = random_fleet(rng, 4)
            res = optimize(devs, sys)
            for dev, entry in zip(devs, res.per_device):
                if entry is None:
                    continue
                assert channel.allocation_feasible(entry[0], dev, sys)

    def test_deterministic(self, rng):
        sys = build_system(Ls_max=64)
        devs = random_fleet(rng, 4)
        r1, r2 = optimize(devs, sys), optimize(devs, sys)
        assert r1.gamma_star == r2.gamma_star
        assert r1.objective == r2.objective
        assert r1.per_device == r2.per_device


class TestBaselines:
    def test_sensing_budget_violation(self, rng):
        sys = build_system()  # ps_max * T_s = 40 J
        dev = random_device(rng, E_budget=30.0)
        with pytest.raises(AllInfeasible):
            baseline_max_sensing([dev], sys)
        # in a fleet the violating device is flagged, not fatal
        res = baseline_max_sensing([dev, random_device(rng, E_budget=50.0)], sys)
        assert res.feasible == [False, True]

    def test_strategy_orderings(self, rng):
        sys = build_system()
        checked = 0
        for _ in range(100):
            devs = random_fleet(rng, int(rng.integers(1, 6)))
            try:
                ms, mc = baseline_max_sensing(devs, sys), baseline_max_comm(devs, sys)
            except AllInfeasible:
                continue
            checked += 1
            assert ms.min_gamma_s() >= mc.min_gamma_s() * (1 - 1e-9)
            for ems, emc in zip(ms.per_device, mc.per_device):
                if ems is not None and emc is not None:
                    assert ems[1].q <= emc[1].q * (1 + 1e-9)
        assert checked >= 50

    def test_max_comm_success_matches_cap_power(self, rng):
        sys = build_system()
        devs = random_fleet(rng, 3)
        res = baseline_max_comm(devs, sys)
        for dev, entry in zip(devs, res.per_device):
            if entry is None:
                continue
            assert entry[0].pc == sys.pc_max
            assert entry[1].q == pytest.approx(float(channel.upload_success(sys.pc_max, dev, sys)), rel=1e-12)

    def test_uniform_half_split_identity(self, rng):
        sys = build_system()
        for _ in range(20):
            dev = random_device(rng)
            res = baseline_uniform([dev], sys)
            (alloc, ld), = [e for e in res.per_device if e]
            half = 0.5 * (dev.E_budget - sys.E_G * dev.kappa * ld.D)
            if sys.ps_min < half / sys.T_s < sys.ps_max:
                assert alloc.ps * sys.T_s == pytest.approx(half, rel=1e-12)

    def test_uniform_near_zero_train_energy(self, rng):
        sys = build_system()
        dev = random_device(rng, kappa=1e-12)
        res = baseline_uniform([dev], sys)
        (alloc, _), = [e for e in res.per_device if e]
        assert alloc.ps * sys.T_s == pytest.approx(dev.E_budget / 2, rel=1e-6)

    def test_all_strategies_feasible_rows(self, rng):
        sys = build_system()
        devs = random_fleet(rng, 4)
        for strat in ("proposed", "max_sensing", "max_comm", "uniform"):
            res = allocate(devs, sys, strat)
            assert isinstance(res, AllocationResult)
            for dev, entry in zip(devs, res.per_device):
                if entry is not None:
                    assert channel.allocation_feasible(entry[0], dev, sys)

    def test_proposed_dominates_baselines(self, rng):
        sys = build_system()
        wins = ties = 0
        for _ in range(30):
            devs = random_fleet(rng, int(rng.integers(2, 6)))
            try:
                best = optimize(devs, sys).surrogate_value()
            except AllInfeasible:
                continue
            for fn in (baseline_max_sensing, baseline_max_comm, baseline_uniform):
                try:
                    other = fn(devs, sys).surrogate_value()
                except AllInfeasible:
                    continue
                assert best >= other * (1 - 1e-9)
                if best > other * (1 + 1e-6):
                    wins += 1
                else:
                    ties += 1
        assert wins > ties

    def test_split_allocation_pinning(self, rng):
        sys = build_system()
        devs = random_fleet(rng, 3)
        base = split_allocation(devs, sys, 0.5)
        pins = [e[0].Ls if e else None for e in base.per_device]
        hi = split_allocation(devs, sys, 0.7, Ls_pinned=pins)
        lo = split_allocation(devs, sys, 0.3, Ls_pinned=pins)
        for b, h, l in zip(base.per_device, hi.per_device, lo.per_device):
            if b is None:
                continue
            assert h[0].Ls == b[0].Ls == l[0].Ls
            assert h[1].q >= b[1].q >= l[1].q
            assert h[1].gamma_s <= b[1].gamma_s <= l[1].gamma_s
