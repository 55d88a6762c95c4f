"""Deterministic CSV emission and gnuplot-ready reshaping.

Floats are written with repr (shortest round-trip form), so identical
runs produce byte-identical files and re-parsing reproduces values
bit-exactly.
"""

from __future__ import annotations

import csv
from collections import defaultdict
from pathlib import Path

import numpy as np

from . import channel
from .allocator import AllocationResult
from .errors import MalformedCSV

ALLOCATION_HEADER = ["strategy", "device_id", "Ls", "ps_W", "pc_W", "D",
                     "gamma_s_linear", "gamma_s_dB", "q", "energy_J", "feasible"]
ROUNDS_HEADER = ["run_id", "seed", "strategy", "round", "loss", "accuracy",
                 "W_t", "skipped", "uploads_bitmask"]
BOUND_HEADER = ["round", "bound_value", "empirical_gap"]
SWEEP_HEADER = ["param", "value", "mode", "strategy", "seed",
                "final_accuracy", "q_avg", "gamma_min_linear", "gamma_min_dB"]


def fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (np.floating,)):
        return repr(float(value))
    if isinstance(value, (np.integer,)):
        return str(int(value))
    return str(value)


def write_csv(path: str | Path, header: list[str], rows: list[list]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def read_csv(path: str | Path) -> tuple[list[str], list[list[str]]]:
    try:
        with open(path, newline="") as f:
            reader = csv.reader(f)
            header = next(reader)
            return header, [row for row in reader]
    except (OSError, StopIteration) as exc:
        raise MalformedCSV(f"cannot read {path}: {exc}") from exc


def allocation_rows(result: AllocationResult, devices, sys) -> list[list]:
    """One row per device with derived link quantities and an energy audit.

    Infeasible devices keep their id and flag; numeric columns are empty.
    """
    rows = []
    for k, entry in enumerate(result.per_device):
        if entry is None:
            rows.append([result.strategy, k] + [""] * 8 + [False])
            continue
        alloc, ld = entry
        energy = channel.energy_used(alloc, ld.D, devices[k], sys)
        rows.append([result.strategy, k, alloc.Ls, alloc.ps, alloc.pc, ld.D,
                     ld.gamma_s, float(channel.to_db(ld.gamma_s)), ld.q,
                     float(energy), True])
    return rows


def rounds_rows(strategy: str, seed: int, logs) -> list[list]:
    run_id = f"{strategy}-s{seed}"
    return [[run_id, seed, strategy, log.round, log.loss, log.accuracy,
             log.W_t, log.skipped, log.upload_bitmask()] for log in logs]


def bound_rows(rounds: list[int], bounds: list[float],
               empirical: list[float] | None = None) -> list[list]:
    emp = empirical if empirical is not None else [""] * len(rounds)
    return [[t, b, e] for t, b, e in zip(rounds, bounds, emp)]


def emit_plotdata(csv_path: str | Path, out_dir: str | Path,
                  x_col: str, y_cols: list[str], series_col: str,
                  seed_col: str = "seed") -> list[Path]:
    """Mean +/- std across seeds, one whitespace-separated file per series.

    Output columns: x, then mean and std for each requested y column.
    Re-parsing the emitted means reproduces them bit-exactly.

    Raises:
        MalformedCSV: on missing columns or unparseable numeric fields.
    """
    header, rows = read_csv(csv_path)
    for col in [x_col, series_col, seed_col, *y_cols]:
        if col not in header:
            raise MalformedCSV(f"{csv_path}: missing column {col!r}")
    ix = {c: header.index(c) for c in header}
    grouped: dict[str, dict[str, dict]] = defaultdict(lambda: defaultdict(dict))
    try:
        for row in rows:
            series = row[ix[series_col]]
            x = row[ix[x_col]]
            seed = row[ix[seed_col]]
            grouped[series][x][seed] = [float(row[ix[y]]) for y in y_cols]
    except (ValueError, IndexError) as exc:
        raise MalformedCSV(f"{csv_path}: bad row: {exc}") from exc

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = Path(csv_path).stem
    written = []
    for series in sorted(grouped):
        path = out_dir / f"{stem}_{series}.dat"
        lines = ["# " + " ".join([x_col] + [f"{y}_mean {y}_std" for y in y_cols])]
        for x in sorted(grouped[series], key=float):
            by_seed = grouped[series][x]
            vals = np.array([by_seed[s] for s in sorted(by_seed)])
            cells = [fmt(float(x))]
            for j in range(len(y_cols)):
                cells.append(fmt(float(np.mean(vals[:, j]))))
                cells.append(fmt(float(np.std(vals[:, j]))))
            lines.append(" ".join(cells))
        path.write_text("\n".join(lines) + "\n")
        written.append(path)
    return written
