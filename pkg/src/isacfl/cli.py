"""Command-line front end.

Verbs: generate (write a scenario config), optimize (allocation CSV),
simulate (round log CSV), compare (all strategies), sweep (ratio or
device-count grids), probe-gradvar (gradient-variance table and noise-
constant fits), bound (gap-bound values), plotdata (mean/std reshaping).

Exit codes: 0 success, 2 infeasible scenario, 3 configuration error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import allocator, csvio
from .bounds import LossRegularity, NoiseModel, gap_bound_curve, optimality_gap_bound
from .errors import AllInfeasible, ConfigError, DegenerateInterval, IsacFlError
from .experiments import (
    allocate_scenario,
    build_dataset,
    run_compare,
    run_sweep,
    simulate_run,
)
from .flsim.probe import (
    fit_sigma0_sq_envelope,
    fit_sigma0_sq_ls,
    gradient_variance_probe,
)
from .flsim.rng import substream
from .flsim.training import local_train
from .scenario import (
    Scenario,
    generate_scenario,
    load_scenario,
    save_scenario,
    scenario_model,
)

EXIT_OK = 0
EXIT_INFEASIBLE = 2
EXIT_CONFIG = 3


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems with the config exit code."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)


def _parse_seeds(spec: str) -> list[int]:
    if ".." in spec:
        lo, hi = spec.split("..", 1)
        return list(range(int(lo), int(hi) + 1))
    return [int(s) for s in spec.split(",") if s]


def _parse_grid(spec: str) -> list[float]:
    if ":" in spec:
        lo, hi, step = (float(x) for x in spec.split(":"))
        n = int(round((hi - lo) / step)) + 1
        return [round(lo + i * step, 10) for i in range(n)]
    return [float(x) for x in spec.split(",") if x]


def _load(args) -> Scenario:
    if args.config:
        sc = load_scenario(args.config)
    else:
        sc = generate_scenario(K=args.devices, seed=args.scenario_seed)
    if getattr(args, "seed", None) is not None:
        sc.seeds = [args.seed]
    if getattr(args, "seeds", None):
        sc.seeds = _parse_seeds(args.seeds)
    if getattr(args, "dataset", None):
        sc.data.dataset = args.dataset
        if args.dataset.startswith("mnist"):
            sc.data.feature_dim = 784
    if getattr(args, "strategy", None):
        sc.strategy = args.strategy
    return sc


def _add_common(p, with_strategy=False):
    p.add_argument("--config", type=Path, help="scenario JSON path")
    p.add_argument("--devices", type=int, default=5,
                   help="fleet size when generating ad hoc (no --config)")
    p.add_argument("--scenario-seed", type=int, default=0,
                   help="fleet draw seed when generating ad hoc")
    p.add_argument("--seed", type=int, help="single run seed")
    p.add_argument("--seeds", help="run seeds, '0..9' or comma list")
    p.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    p.add_argument("--dataset", help="synthetic or mnist:PATH")
    p.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    if with_strategy:
        p.add_argument("--strategy", choices=allocator.STRATEGIES)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="isacfl", description=__doc__,
                formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="verb", required=True)

    g = sub.add_parser("generate", help="write a scenario config JSON")
    g.add_argument("--devices", type=int, default=5)
    g.add_argument("--scenario-seed", type=int, default=0)
    g.add_argument("--seeds", default="0..9")
    g.add_argument("--overrides", help="JSON string merged into the scenario")
    g.add_argument("--dataset", help="synthetic or mnist:PATH")
    g.add_argument("--out", type=Path, required=True, help="output JSON path")

    for name, with_strategy in (("optimize", True), ("simulate", True),
                                ("compare", False)):
        _add_common(sub.add_parser(name, help=f"{name} a scenario"), with_strategy)

    s = sub.add_parser("sweep", help="grid sweep over a scenario parameter")
    _add_common(s)
    s.add_argument("--param", required=True,
                   choices=["comm-energy-ratio", "comm_energy_ratio", "devices"])
    s.add_argument("--grid", help="'lo:hi:step' or comma list")

    pr = sub.add_parser("probe-gradvar",
                        help="gradient variance over (D, SNR) grid")
    _add_common(pr)
    pr.add_argument("--d-grid", default="250,500,1000,2000,4000")
    pr.add_argument("--gamma-grid", default="0.5,1,2,4,8")
    pr.add_argument("--draws", type=int, default=120)

    b = sub.add_parser("bound", help="optimality-gap bound for a scenario")
    _add_common(b)
    b.add_argument("--at-round", type=int, required=True)
    b.add_argument("--mu", type=float, default=1.0)
    b.add_argument("--l-smooth", type=float, default=4.0)
    b.add_argument("--eta", type=float)
    b.add_argument("--sigma0-sq", type=float, default=1.0)
    b.add_argument("--zeta-sq", type=float, default=0.0)
    b.add_argument("--gap0", type=float, default=1.0)

    pl = sub.add_parser("plotdata", help="reshape a CSV to mean/std columns")
    pl.add_argument("--csv", type=Path, required=True)
    pl.add_argument("--out", type=Path, required=True)

    return p


def _cmd_generate(args) -> int:
    overrides = json.loads(args.overrides) if args.overrides else {}
    if args.dataset:
        overrides.setdefault("data", {})["dataset"] = args.dataset
    overrides["seeds"] = _parse_seeds(args.seeds)
    sc = generate_scenario(K=args.devices, seed=args.scenario_seed,
                           overrides=overrides)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    save_scenario(sc, args.out)
    print(f"wrote {args.out}")
    return EXIT_OK


def _cmd_optimize(args) -> int:
    sc = _load(args)
    result = allocate_scenario(sc)
    path = args.out / "allocation.csv"
    csvio.write_csv(path, csvio.ALLOCATION_HEADER,
                    csvio.allocation_rows(result, sc.devices, sc.system))
    print(f"strategy={result.strategy} gamma_star={result.gamma_star!r} "
          f"objective={result.objective!r}")
    print(f"wrote {path}")
    return EXIT_OK


def _cmd_simulate(args) -> int:
    sc = _load(args)
    result = allocate_scenario(sc)
    rows = []
    for seed in sc.seeds:
        rows += csvio.rounds_rows(sc.strategy, seed, simulate_run(sc, result, seed))
    path = args.out / "rounds.csv"
    csvio.write_csv(path, csvio.ROUNDS_HEADER, rows)
    print(f"wrote {path}")
    return EXIT_OK


def _cmd_compare(args) -> int:
    sc = _load(args)
    paths = run_compare(sc, args.out, jobs=args.jobs)
    for p in paths.values():
        print(f"wrote {p}")
    return EXIT_OK


def _cmd_sweep(args) -> int:
    sc = _load(args)
    grid = _parse_grid(args.grid) if args.grid else None
    path = run_sweep(sc, args.param.replace("-", "_"), grid, args.out,
                     jobs=args.jobs)
    print(f"wrote {path}")
    return EXIT_OK


def _cmd_probe(args) -> int:
    sc = _load(args)
    train, _ = build_dataset(sc)
    model = scenario_model(sc)
    seed = sc.seeds[0]
    w = model.init_params(substream(seed, "probe-init"))
    w = local_train(model, w, train.X, train.y, 30, 0.05, 64,
                    substream(seed, "probe-pretrain"))
    cells = gradient_variance_probe(
        model, w, train,
        D_grid=[int(x) for x in _parse_grid(args.d_grid)],
        gamma_grid=_parse_grid(args.gamma_grid),
        n_draws=args.draws, seed=seed)
    path = args.out / "gradvar.csv"
    csvio.write_csv(path, ["D", "gamma", "variance", "n_draws"],
                    [[c.D, c.gamma, c.variance, c.n_draws] for c in cells])
    print(f"sigma0_sq_ls={fit_sigma0_sq_ls(cells)!r} "
          f"sigma0_sq_envelope={fit_sigma0_sq_envelope(cells)!r}")
    print(f"wrote {path}")
    return EXIT_OK


def _cmd_bound(args) -> int:
    sc = _load(args)
    result = allocate_scenario(sc)
    eta = args.eta if args.eta is not None else 1.0 / (2.0 * args.l_smooth)
    reg = LossRegularity(mu=args.mu, L_smooth=args.l_smooth, eta=eta)
    nm = NoiseModel(sigma0_sq=args.sigma0_sq, zeta_sq=args.zeta_sq)
    dq = [(e[1].D, e[1].q) for e in result.per_device if e is not None]
    gamma_min = result.min_gamma_s()
    value = optimality_gap_bound(args.at_round, args.gap0, reg, nm, gamma_min, dq)
    print(f"bound_at_round_{args.at_round}={value!r}")
    ts = list(range(0, args.at_round + 1))
    path = args.out / "bound_curve.csv"
    csvio.write_csv(path, csvio.BOUND_HEADER,
                    csvio.bound_rows(ts, gap_bound_curve(ts, args.gap0, reg, nm,
                                                         gamma_min, dq)))
    print(f"wrote {path}")
    return EXIT_OK


def _cmd_plotdata(args) -> int:
    header, _ = csvio.read_csv(args.csv)
    if "round" in header:
        written = csvio.emit_plotdata(args.csv, args.out, x_col="round",
                                      y_cols=["loss", "accuracy"],
                                      series_col="strategy")
    elif "value" in header:
        written = csvio.emit_plotdata(args.csv, args.out, x_col="value",
                                      y_cols=["final_accuracy", "q_avg",
                                              "gamma_min_linear"],
                                      series_col="mode")
    else:
        raise ConfigError(f"{args.csv}: unrecognized CSV layout")
    for p in written:
        print(f"wrote {p}")
    return EXIT_OK


_COMMANDS = {
    "generate": _cmd_generate,
    "optimize": _cmd_optimize,
    "simulate": _cmd_simulate,
    "compare": _cmd_compare,
    "sweep": _cmd_sweep,
    "probe-gradvar": _cmd_probe,
    "bound": _cmd_bound,
    "plotdata": _cmd_plotdata,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.verb](args)
    except (AllInfeasible, DegenerateInterval) as exc:
        print(f"infeasible scenario: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (ConfigError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except IsacFlError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
