"""Dataset generation, sensing corruption, partitioning, IDX ingestion."""

import gzip
import struct

import numpy as np
import pytest

from isacfl.errors import InsufficientData
from isacfl.flsim.data import (
    Dataset,
    add_awgn_at_snr,
    corrupt_at_snr,
    load_mnist,
    make_synthetic,
    partition,
)
from isacfl.flsim.rng import substream


class TestSynthetic:
    def test_shapes_and_balance(self):
        train, test = make_synthetic(1000, 200, feature_dim=16, num_classes=10, seed=3)
        assert train.X.shape == (1000, 16)
        assert test.X.shape == (200, 16)
        counts = np.bincount(train.y, minlength=10)
        assert counts.min() == counts.max() == 100

    def test_deterministic(self):
        a, _ = make_synthetic(100, 10, seed=5)
        b, _ = make_synthetic(100, 10, seed=5)
        assert np.array_equal(a.X, b.X) and np.array_equal(a.y, b.y)

    def test_validation(self):
        with pytest.raises(ValueError):
            Dataset(X=np.zeros((0, 3)), y=np.zeros(0, dtype=int), num_classes=2)
        with pytest.raises(ValueError):
            Dataset(X=np.array([[np.inf]]), y=np.array([0]), num_classes=1)


class TestAwgn:
    def test_infinite_snr_identity(self):
        x = np.arange(8, dtype=float)
        out = add_awgn_at_snr(x, np.inf, substream(0))
        assert np.array_equal(out, x)

    def test_monte_carlo_power_ratio(self):
        rng = substream(1)
        x = rng.normal(size=32)
        px = float(x @ x)
        gamma = 2.5
        ratios = []
        for _ in range(10_000):
            n = add_awgn_at_snr(x, gamma, rng) - x
            ratios.append(float(n @ n) / px)
        assert np.mean(ratios) == pytest.approx(1.0 / gamma, rel=0.03)

    def test_zero_db_noise_equals_signal_power(self):
        rng = substream(2)
        x = rng.normal(size=64)
        acc = 0.0
        trials = 5000
        for _ in range(trials):
            n = add_awgn_at_snr(x, 1.0, rng) - x
            acc += float(n @ n)
        assert acc / trials == pytest.approx(float(x @ x), rel=0.05)

    def test_batch_matches_convention(self):
        rng = substream(3)
        X = rng.normal(size=(2000, 16))
        noisy = corrupt_at_snr(X, 4.0, rng)
        ratio = np.sum((noisy - X) ** 2) / np.sum(X ** 2)
        assert ratio == pytest.approx(0.25, rel=0.05)

    def test_invalid_snr(self):
        with pytest.raises(ValueError):
            add_awgn_at_snr(np.ones(4), 0.0, substream(0))


def tiny_labeled(n=40, classes=10):
    y = np.tile(np.arange(classes), n // classes)
    X = y[:, None] + np.zeros((n, 3))
    return Dataset(X=X.astype(float), y=y.astype(np.int64), num_classes=classes)


class TestPartition:
    def test_iid_two_singletons(self):
        ds = Dataset(X=np.eye(2), y=np.array([0, 1]), num_classes=2)
        p = partition(ds, [1, 1], "iid", substream(4))
        assert {int(p.indices[0][0]), int(p.indices[1][0])} == {0, 1}

    def test_iid_exact_sizes_disjoint(self):
        ds = tiny_labeled(40)
        p = partition(ds, [10, 5, 12], "iid", substream(5))
        assert [len(ix) for ix in p.indices] == [10, 5, 12]
        all_ix = np.concatenate(p.indices)
        assert len(np.unique(all_ix)) == len(all_ix)

    def test_noniid_label_confinement(self):
        # 10 balanced classes, 5 devices x 2 shards, shard size = class size
        train, _ = make_synthetic(2000, 10, feature_dim=4, num_classes=10, seed=6)
        p = partition(train, [100] * 5, "noniid", substream(6), shards_per_device=2)
        for ix in p.indices:
            assert len(np.unique(train.y[ix])) <= 2

    def test_same_seed_identical(self):
        ds = tiny_labeled(40)
        p1 = partition(ds, [7, 7], "iid", substream(7))
        p2 = partition(ds, [7, 7], "iid", substream(7))
        assert all(np.array_equal(a, b) for a, b in zip(p1.indices, p2.indices))

    def test_insufficient_data(self):
        ds = tiny_labeled(40)
        with pytest.raises(InsufficientData):
            partition(ds, [30, 30], "iid", substream(8))

    def test_oversubscription_resamples_within_pools(self):
        ds = tiny_labeled(40)
        p = partition(ds, [60, 90], "iid", substream(9), allow_resample=True)
        assert [len(ix) for ix in p.indices] == [60, 90]
        pools = [set(ix.tolist()) for ix in p.indices]
        assert not pools[0] & pools[1]
        assert p.distinct[0] <= 40 and p.distinct[1] <= 40
        assert p.distinct[0] < 60  # repeats happened and were recorded

    def test_noniid_pad_by_resample(self):
        train, _ = make_synthetic(2000, 10, feature_dim=4, num_classes=10, seed=10)
        p = partition(train, [600] * 5, "noniid", substream(10),
                      shards_per_device=2, allow_resample=True)
        for ix, dist in zip(p.indices, p.distinct):
            assert len(ix) == 600
            assert dist <= 400  # two shards of 200
            assert len(np.unique(train.y[ix])) <= 2


def write_idx_pair(tmp_path, X, y, train=True, gz=False):
    img_name = ("train-images-idx3-ubyte" if train else "t10k-images-idx3-ubyte")
    lbl_name = ("train-labels-idx1-ubyte" if train else "t10k-labels-idx1-ubyte")
    n, rows, cols = X.shape
    img = struct.pack(">iiii", 0x00000803, n, rows, cols) + X.astype(np.uint8).tobytes()
    lbl = struct.pack(">ii", 0x00000801, n) + y.astype(np.uint8).tobytes()
    for name, blob in ((img_name, img), (lbl_name, lbl)):
        if gz:
            with gzip.open(tmp_path / (name + ".gz"), "wb") as f:
                f.write(blob)
        else:
            (tmp_path / name).write_bytes(blob)


class TestMnistIdx:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(0)
        Xtr = rng.integers(0, 256, size=(30, 4, 4))
        ytr = rng.integers(0, 10, size=30)
        Xte = rng.integers(0, 256, size=(10, 4, 4))
        yte = rng.integers(0, 10, size=10)
        write_idx_pair(tmp_path, Xtr, ytr, train=True)
        write_idx_pair(tmp_path, Xte, yte, train=False, gz=True)
        train, test = load_mnist(tmp_path, n_train=None, n_test=None)
        assert train.X.shape == (30, 16)
        assert np.allclose(train.X, Xtr.reshape(30, 16) / 255.0)
        assert np.array_equal(train.y, ytr)
        assert test.X.shape == (10, 16)
        assert np.array_equal(test.y, yte)
        assert train.X.min() >= 0.0 and train.X.max() <= 1.0

    def test_caps(self, tmp_path):
        rng = np.random.default_rng(1)
        write_idx_pair(tmp_path, rng.integers(0, 256, (30, 3, 3)), rng.integers(0, 10, 30), True)
        write_idx_pair(tmp_path, rng.integers(0, 256, (12, 3, 3)), rng.integers(0, 10, 12), False)
        train, test = load_mnist(tmp_path, n_train=20, n_test=5)
        assert len(train) == 20 and len(test) == 5

    def test_bad_magic(self, tmp_path):
        blob = struct.pack(">iiii", 0xDEAD, 1, 2, 2) + bytes(4)
        (tmp_path / "train-images-idx3-ubyte").write_bytes(blob)
        lbl = struct.pack(">ii", 0x00000801, 1) + bytes(1)
        (tmp_path / "train-labels-idx1-ubyte").write_bytes(lbl)
        with pytest.raises(ValueError, match="magic"):
            load_mnist(tmp_path)
