"""Federated averaging with stochastic uploads over sensed data.

Each round: broadcast the global parameters, run a fixed number of local
SGD steps per device on its (noise-corrupted) local data, draw Bernoulli
upload outcomes, and average the received models weighted by sample
counts. Rounds in which nothing arrives leave the global model untouched.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DimensionMismatch
from .rng import substream


@dataclass
class RoundLog:
    """One aggregation round: outcomes, weights and evaluation metrics."""

    round: int
    uploads: list[int]
    weights: list[float]
    W_t: float
    loss: float
    accuracy: float
    skipped: bool

    def upload_bitmask(self) -> int:
        """Device k successful -> bit k set (device 0 is the LSB)."""
        return sum(1 << k for k, c in enumerate(self.uploads) if c)


def local_train(model, w_in: np.ndarray, X: np.ndarray, y: np.ndarray,
                n_steps: int, eta: float, batch_size: int | None,
                rng: np.random.Generator) -> np.ndarray:
    """n_steps of SGD on uniformly sampled mini-batches.

    batch_size None (or >= the dataset) takes full-batch steps.
    """
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    w = w_in.copy()
    n = len(X)
    full = batch_size is None or batch_size >= n
    for _ in range(n_steps):
        if full:
            bx, by = X, y
        else:
            idx = rng.integers(0, n, size=batch_size)
            bx, by = X[idx], y[idx]
        _, g = model.loss_and_grad(w, bx, by)
        w -= eta * g
    return w


def sample_uploads(q: list[float], rng: np.random.Generator) -> list[int]:
    """Independent Bernoulli success indicators, one per device."""
    u = rng.random(len(q))
    return [int(ui < qi) for ui, qi in zip(u, q)]


def aggregate(local_models: list[tuple[np.ndarray, int, int]]):
    """Sample-count-weighted average over the devices that uploaded.

    Entries are (parameters, D_k, C_k). Returns (w or None, weights, W_t);
    None signals a skipped round (no uploads).

    Raises:
        DimensionMismatch: if parameter vectors differ in length.
    """
    dims = {len(w) for w, _, _ in local_models}
    if len(dims) > 1:
        raise DimensionMismatch(f"parameter lengths differ: {sorted(dims)}")
    W_t = float(sum(d * c for _, d, c in local_models))
    if W_t <= 0:
        return None, [0.0] * len(local_models), 0.0
    weights = [d * c / W_t for _, d, c in local_models]
    out = np.zeros_like(local_models[0][0])
    for (w, _, _), rho in zip(local_models, weights):
        if rho > 0:
            out += rho * w
    return out, weights, W_t


@dataclass
class FedConfig:
    """Protocol constants for one simulation run."""

    rounds: int = 100
    local_steps: int = 5
    eta: float = 0.01
    batch_size: int | None = 32


def run_federated(model, device_X: list[np.ndarray], device_y: list[np.ndarray],
                  agg_sizes: list[int], q: list[float], cfg: FedConfig, seed: int,
                  test_X: np.ndarray, test_y: np.ndarray,
                  loss_eval_cap: int = 512) -> list[RoundLog]:
    """One federated run; returns a log per round.

    agg_sizes are the sample counts used as aggregation weights (the
    allocator's D_k). The logged loss is the size-weighted training loss
    over capped per-device subsets; accuracy is measured on the clean
    held-out split. All randomness derives from keyed substreams, so the
    log stream is reproducible for a given seed regardless of scheduling.
    """
    K = len(device_X)
    w = model.init_params(substream(seed, "init"))
    eval_sets = []
    for k in range(K):
        cap = min(loss_eval_cap, len(device_X[k]))
        eval_sets.append((device_X[k][:cap], device_y[k][:cap]))
    total = float(sum(agg_sizes))
    logs = []
    for t in range(1, cfg.rounds + 1):
        locals_w = [
            local_train(model, w, device_X[k], device_y[k], cfg.local_steps,
                        cfg.eta, cfg.batch_size, substream(seed, "train", t, k))
            for k in range(K)
        ]
        uploads = sample_uploads(q, substream(seed, "upload", t))
        w_new, weights, W_t = aggregate(
            [(locals_w[k], agg_sizes[k], uploads[k]) for k in range(K)])
        skipped = w_new is None
        if not skipped:
            w = w_new
        loss = sum(agg_sizes[k] / total * model.loss(w, *eval_sets[k]) for k in range(K))
        acc = float(np.mean(model.predict(w, test_X) == test_y))
        logs.append(RoundLog(round=t, uploads=uploads, weights=weights, W_t=W_t,
                             loss=float(loss), accuracy=acc, skipped=skipped))
    return logs
