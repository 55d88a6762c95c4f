"""Shared builders for deployment-style random devices and systems."""

import numpy as np
import pytest

from isacfl.channel import DeviceParams, SystemParams

# Default desk-scale constants: headline deployment values plus calibrated
# noise powers that land sensing SNRs in the 0-8 dB band and upload success
# around 0.7-0.9 at ~1 W.
SYS_DEFAULTS = dict(T_s=20.0, T_th=0.3, E_G=100, z=2_720_064.0, alpha_p=4.0,
                    ps_min=0.01, ps_max=2.0, pc_min=0.01, pc_max=2.0, Ls_max=256)
DEV_DEFAULTS = dict(tau=1e-4, G=10.0, omega_s=1.0, omega_c=1.0,
                    sigma2_s=1.6e-3, sigma2_c=2.4e-7, B=1e6,
                    E_budget=50.0, kappa=1e-4, T_train=0.1)


def build_system(**kw) -> SystemParams:
    base = dict(SYS_DEFAULTS)
    base.update(kw)
    return SystemParams(**base)


def random_device(rng: np.random.Generator, **kw) -> DeviceParams:
    base = dict(DEV_DEFAULTS)
    base["d_target"] = float(rng.uniform(10.0, 30.0))
    base["d_server"] = float(rng.uniform(20.0, 35.0))
    base.update(kw)
    return DeviceParams(**base)


def random_fleet(rng: np.random.Generator, K: int, **kw) -> list[DeviceParams]:
    return [random_device(rng, **kw) for _ in range(K)]


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
