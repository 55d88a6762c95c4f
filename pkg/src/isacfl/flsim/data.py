"""Datasets, sensing-noise corruption and federated partitioning.

The stock testbed is a 10-class Gaussian mixture sized to run on a CPU in
minutes; MNIST can be ingested from IDX files and is capped to the same
sizes. Sensing quality enters as additive white Gaussian noise scaled so
that each sample's noise energy is its own signal energy divided by the
sensing SNR.
"""

from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import InsufficientData

IDX_IMAGE_MAGIC = 0x00000803
IDX_LABEL_MAGIC = 0x00000801


@dataclass
class Dataset:
    """Feature matrix (n, d), integer labels (n,) and the class count."""

    X: np.ndarray
    y: np.ndarray
    num_classes: int

    def __post_init__(self) -> None:
        if len(self.X) == 0:
            raise ValueError("dataset must be nonempty")
        if not np.all(np.isfinite(self.X)):
            raise ValueError("dataset features must be finite")
        if len(self.X) != len(self.y):
            raise ValueError("feature/label length mismatch")

    @property
    def feature_dim(self) -> int:
        return self.X.shape[1]

    def __len__(self) -> int:
        return len(self.X)


@dataclass
class Partition:
    """Per-device index lists into a dataset.

    Lists may contain repeats when a device's sample budget exceeds its
    share of the pool; distinct counts the unique underlying samples.
    """

    indices: list[np.ndarray]
    mode: str
    distinct: list[int] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not self.distinct:
            self.distinct = [int(len(np.unique(ix))) for ix in self.indices]


def make_synthetic(n_train: int, n_test: int, feature_dim: int = 64,
                   num_classes: int = 10, class_sep: float = 0.4,
                   seed: int = 0) -> tuple[Dataset, Dataset]:
    """Balanced Gaussian-mixture classification data.

    Class means are drawn N(0, class_sep^2) per coordinate with unit
    within-class variance; class_sep tunes difficulty.
    """
    from .rng import substream
    rng = substream(seed, "dataset")
    means = rng.normal(0.0, class_sep, size=(num_classes, feature_dim))

    def draw(n):
        reps = -(-n // num_classes)
        y = np.tile(np.arange(num_classes), reps)[:n]
        rng.shuffle(y)
        X = means[y] + rng.normal(size=(n, feature_dim))
        return Dataset(X=X, y=y.astype(np.int64), num_classes=num_classes)

    return draw(n_train), draw(n_test)


def add_awgn_at_snr(sample: np.ndarray, gamma_s: float,
                    rng: np.random.Generator) -> np.ndarray:
    """One sample plus zero-mean Gaussian noise at the given sensing SNR.

    Total noise variance is ||sample||^2 / gamma_s, split equally across
    coordinates (per-sample empirical power convention); gamma_s = inf
    returns the sample unchanged.
    """
    if gamma_s <= 0:
        raise ValueError("gamma_s must be positive")
    power = float(np.dot(sample, sample))
    var = power / gamma_s / sample.shape[-1]
    if var == 0.0:
        return sample.copy()
    return sample + rng.normal(0.0, np.sqrt(var), size=sample.shape)


def corrupt_at_snr(X: np.ndarray, gamma_s: float,
                   rng: np.random.Generator) -> np.ndarray:
    """Batch form of `add_awgn_at_snr`, one independent draw per sample."""
    if gamma_s <= 0:
        raise ValueError("gamma_s must be positive")
    if np.isinf(gamma_s):
        return X.copy()
    power = np.sum(X * X, axis=1, keepdims=True)
    std = np.sqrt(power / gamma_s / X.shape[1])
    return X + std * rng.standard_normal(X.shape)


def _pad_resample(pool: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
    """First n of the pool, extended by resampling with replacement."""
    if n <= len(pool):
        return pool[:n].copy()
    extra = rng.choice(pool, size=n - len(pool), replace=True)
    return np.concatenate([pool, extra])


def partition(dataset: Dataset, devices_D: list[int], mode: str,
              rng: np.random.Generator, shards_per_device: int = 2,
              allow_resample: bool = False) -> Partition:
    """Assign each device exactly D_k sample indices.

    iid: uniform shuffle, then contiguous cuts of the requested sizes.
    noniid: label-sorted pool dealt as shards, shards_per_device each, so a
    device sees few distinct labels; short pools pad by resampling.

    With allow_resample, budgets beyond the pool are met by resampling
    within each device's disjoint base pool (sensed duplicates reuse the
    same acquisition); otherwise oversubscription raises InsufficientData.
    """
    n = len(dataset)
    if any(d < 1 for d in devices_D):
        raise ValueError("every device budget must be >= 1")
    total = int(sum(devices_D))
    K = len(devices_D)
    if mode not in ("iid", "noniid"):
        raise ValueError(f"unknown partition mode {mode!r}")

    if mode == "iid":
        perm = rng.permutation(n)
        if total <= n:
            cuts = np.cumsum([0] + list(devices_D))
            idx = [perm[cuts[k]:cuts[k + 1]].copy() for k in range(K)]
        else:
            if not allow_resample:
                raise InsufficientData(f"need {total} samples, pool has {n}")
            if n < K:
                raise InsufficientData(f"pool of {n} cannot cover {K} devices")
            # disjoint base pools proportional to the budgets, then resample
            shares = np.floor(n * np.cumsum(devices_D) / total).astype(int)
            starts = np.concatenate([[0], shares[:-1]])
            idx = [_pad_resample(perm[s:e], d, rng)
                   for s, e, d in zip(starts, shares, devices_D)]
        return Partition(indices=idx, mode="iid")

    n_shards = K * shards_per_device
    if n < n_shards:
        raise InsufficientData(f"pool of {n} cannot form {n_shards} shards")
    if total > n and not allow_resample:
        raise InsufficientData(f"need {total} samples, pool has {n}")
    order = np.argsort(dataset.y, kind="stable")
    shards = np.array_split(order, n_shards)
    deal = rng.permutation(n_shards)
    idx = []
    for k, d in enumerate(devices_D):
        own = np.concatenate([shards[s] for s in deal[k * shards_per_device:(k + 1) * shards_per_device]])
        own = own[rng.permutation(len(own))]
        if d > len(own) and not allow_resample:
            raise InsufficientData(f"device {k} needs {d} samples, shards hold {len(own)}")
        idx.append(_pad_resample(own, d, rng))
    return Partition(indices=idx, mode=f"noniid{shards_per_device}")


def _read_idx(path: Path, expect_magic: int) -> np.ndarray:
    opener = gzip.open if path.suffix == ".gz" else open
    with opener(path, "rb") as f:
        magic, count = struct.unpack(">ii", f.read(8))
        if magic != expect_magic:
            raise ValueError(f"{path}: magic {magic:#010x}, expected {expect_magic:#010x}")
        if expect_magic == IDX_IMAGE_MAGIC:
            rows, cols = struct.unpack(">ii", f.read(8))
            raw = np.frombuffer(f.read(count * rows * cols), dtype=np.uint8)
            return raw.reshape(count, rows * cols)
        return np.frombuffer(f.read(count), dtype=np.uint8)


def _find_idx_file(root: Path, stem: str) -> Path:
    for name in (stem, stem + ".gz", stem.replace("-idx", ".idx"),
                 stem.replace("-idx", ".idx") + ".gz"):
        p = root / name
        if p.exists():
            return p
    raise FileNotFoundError(f"no {stem}[.gz] under {root}")


def load_mnist(root: str | Path, n_train: int | None = 20_000,
               n_test: int | None = 4_000) -> tuple[Dataset, Dataset]:
    """MNIST from IDX files in a directory, pixels scaled to [0, 1].

    Caps default to the desk-scale synthetic sizes; None keeps everything.
    """
    root = Path(root)
    pairs = []
    for img_stem, lbl_stem, cap in (
        ("train-images-idx3-ubyte", "train-labels-idx1-ubyte", n_train),
        ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte", n_test),
    ):
        X = _read_idx(_find_idx_file(root, img_stem), IDX_IMAGE_MAGIC)
        y = _read_idx(_find_idx_file(root, lbl_stem), IDX_LABEL_MAGIC)
        if len(X) != len(y):
            raise ValueError(f"{img_stem}: {len(X)} images vs {len(y)} labels")
        if cap is not None:
            X, y = X[:cap], y[:cap]
        pairs.append(Dataset(X=X.astype(np.float64) / 255.0,
                             y=y.astype(np.int64), num_classes=10))
    return pairs[0], pairs[1]
