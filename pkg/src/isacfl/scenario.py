"""Scenario configuration: generation, calibration and JSON round-trip.

A scenario bundles the system constants, the device fleet, the data and
training configuration and the seed list. Field names in the JSON form
carry explicit SI units (E_budget_J, tau_s, ...) to keep configs
unambiguous; antenna gain may be given as G_dBi or G_linear.

Unstated physical constants live in one calibration block: sensing and
uplink noise powers default to values computed from the model size and
power bounds so that the weakest device tops out near 6 dB sensing SNR
and a 1 W upload succeeds with probability ~0.8. These defaults are
calibration choices, not measured constants.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .allocator import PROPOSED, STRATEGIES, SearchConfig
from .channel import DeviceParams, SystemParams, from_db
from .errors import ConfigError
from .flsim.models import build_model, model_size_bits

# Headline deployment constants (distances in meters, powers in watts).
D_TARGET_RANGE = (10.0, 30.0)
D_SERVER_RANGE = (20.0, 35.0)
ANTENNA_GAIN_DBI = 10.0
ENERGY_BUDGET_J = 50.0
KAPPA_J = 1e-4
BANDWIDTH_HZ = 1e6
TAU_S = 1e-4
T_SENSE_S = 20.0
T_ROUND_S = 0.3
ALPHA_P = 4.0
PS_MAX_W = 2.0
PC_MAX_W = 2.0
GLOBAL_ROUNDS = 100
LOCAL_STEPS = 5

# Calibration block: constants the physical model needs but the deployment
# table does not state.
PS_MIN_W = 0.01
PC_MIN_W = 0.01
LS_MAX = 256
T_TRAIN_S = 0.1
OMEGA_S = 1.0
OMEGA_C = 1.0
GAMMA_UB_TARGET = 2.5      # ~4 dB reachable by the weakest possible device
Q_TARGET = 0.6             # upload success at the reference power/distance
PC_REF_W = 1.0
D_SERVER_REF_M = 27.0


@dataclass
class DataConfig:
    dataset: str = "synthetic"
    feature_dim: int = 64
    num_classes: int = 10
    n_train: int = 20_000
    n_test: int = 4_000
    class_sep: float = 0.4
    partition_mode: str = "iid"
    shards_per_device: int = 2
    data_seed: int = 0


@dataclass
class TrainConfig:
    rounds: int = GLOBAL_ROUNDS
    local_steps: int = LOCAL_STEPS
    lr: float = 0.05
    batch_size: int = 32
    model: str = "mlp"
    hidden: tuple[int, ...] = (256, 256)
    leaky_slope: float = 0.01
    loss_eval_cap: int = 512
    test_eval_cap: int = 2_000


@dataclass
class Scenario:
    system: SystemParams
    devices: list[DeviceParams]
    strategy: str = PROPOSED
    data: DataConfig = field(default_factory=DataConfig)
    training: TrainConfig = field(default_factory=TrainConfig)
    seeds: list[int] = field(default_factory=lambda: [0])
    search: SearchConfig = field(default_factory=SearchConfig)
    sweep: dict | None = None

    def __post_init__(self) -> None:
        if not self.devices:
            raise ConfigError("scenario needs at least one device")
        if not self.seeds:
            raise ConfigError("scenario needs at least one seed")
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"unknown strategy {self.strategy!r}")

    @property
    def K(self) -> int:
        return len(self.devices)


def scenario_model(sc: Scenario):
    return build_model(sc.training.model, sc.data.feature_dim, sc.data.num_classes,
                       hidden=sc.training.hidden, slope=sc.training.leaky_slope)


def extend_fleet(sc: Scenario, K: int) -> list[DeviceParams]:
    """Fleet of K devices sharing the scenario's constants, fresh distances.

    Drawn from a stream keyed by the data seed, so growing K extends the
    fleet instead of redrawing it.
    """
    from .flsim.rng import substream
    rng = substream(sc.data.data_seed, "fleet")
    template = asdict(sc.devices[0])
    out = []
    for _ in range(K):
        out.append(DeviceParams(**{
            **template,
            "d_target": float(rng.uniform(*D_TARGET_RANGE)),
            "d_server": float(rng.uniform(*D_SERVER_RANGE)),
        }))
    return out


def model_bits(data: DataConfig, training: TrainConfig) -> int:
    m = build_model(training.model, data.feature_dim, data.num_classes,
                    hidden=training.hidden, slope=training.leaky_slope)
    return model_size_bits(m.n_params)


def calibrated_sigma2_c(z_bits: float, B: float = BANDWIDTH_HZ,
                        T_th: float = T_ROUND_S, T_train: float = T_TRAIN_S,
                        G: float | None = None, omega_c: float = OMEGA_C,
                        alpha_p: float = ALPHA_P) -> float:
    """Uplink noise power making q(PC_REF_W) = Q_TARGET at the reference
    distance for this payload size."""
    G = from_db(ANTENNA_GAIN_DBI) if G is None else G
    r_ratio = z_bits / (T_th - T_train) / B
    snr_needed = 2.0 ** min(r_ratio, 1020.0) - 1.0
    return (-math.log(Q_TARGET) * PC_REF_W * G * omega_c
            / (D_SERVER_REF_M ** (alpha_p / 2.0) * snr_needed))


def calibrated_sigma2_s(G: float | None = None, omega_s: float = OMEGA_S,
                        ps_max: float = PS_MAX_W, Ls_max: int = LS_MAX,
                        alpha_p: float = ALPHA_P) -> float:
    """Sensing noise power putting the farthest device's maximum sensing
    SNR at GAMMA_UB_TARGET."""
    G = from_db(ANTENNA_GAIN_DBI) if G is None else G
    d_max = D_TARGET_RANGE[1]
    return G * omega_s * ps_max * Ls_max / (GAMMA_UB_TARGET * d_max ** alpha_p)


def generate_scenario(K: int = 5, seed: int = 0,
                      overrides: dict | None = None) -> Scenario:
    """Random fleet of K devices with deployment-table constants.

    Distances are uniform in the table ranges; everything else defaults.
    overrides is a nested dict merged over the generated JSON form, e.g.
    {"device_overrides": {"0": {"E_budget_J": 10.0}}} for a straggler, or
    {"system": {"Ls_max": 64}}; {"straggler": {"device": 0,
    "energy_factor": 0.2}} scales one device's budget.
    """
    if K < 1:
        raise ConfigError("K must be >= 1")
    overrides = dict(overrides or {})
    data = DataConfig(**overrides.pop("data", {}))
    training_kw = overrides.pop("training", {})
    if "hidden" in training_kw:
        training_kw["hidden"] = tuple(training_kw["hidden"])
    training = TrainConfig(**training_kw)

    if data.dataset.startswith("mnist"):
        data.feature_dim = 784

    z = float(model_bits(data, training))
    sys_kw = dict(T_s=T_SENSE_S, T_th=T_ROUND_S, E_G=GLOBAL_ROUNDS, z=z,
                  alpha_p=ALPHA_P, ps_min=PS_MIN_W, ps_max=PS_MAX_W,
                  pc_min=PC_MIN_W, pc_max=PC_MAX_W, Ls_max=LS_MAX)
    sys_over = {_strip_unit(k): v for k, v in overrides.pop("system", {}).items()}
    sys_kw.update(sys_over)
    system = SystemParams(**sys_kw)

    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence((seed, 0x5c0))))
    sigma2_s = calibrated_sigma2_s(ps_max=system.ps_max, Ls_max=system.Ls_max,
                                   alpha_p=system.alpha_p)
    sigma2_c = calibrated_sigma2_c(system.z, T_th=system.T_th,
                                   alpha_p=system.alpha_p)
    dev_over = _normalize_device_keys(overrides.pop("devices", {}))
    per_dev = {int(i): _normalize_device_keys(v)
               for i, v in overrides.pop("device_overrides", {}).items()}
    devices = []
    for k in range(K):
        kw = dict(tau=TAU_S,
                  d_target=float(rng.uniform(*D_TARGET_RANGE)),
                  d_server=float(rng.uniform(*D_SERVER_RANGE)),
                  G=float(from_db(ANTENNA_GAIN_DBI)),
                  omega_s=OMEGA_S, omega_c=OMEGA_C,
                  sigma2_s=sigma2_s, sigma2_c=sigma2_c,
                  B=BANDWIDTH_HZ, E_budget=ENERGY_BUDGET_J, kappa=KAPPA_J,
                  T_train=T_TRAIN_S)
        kw.update(dev_over)
        kw.update(per_dev.get(k, {}))
        devices.append(DeviceParams(**kw))

    straggler = overrides.pop("straggler", None)
    if straggler:
        i = int(straggler.get("device", 0))
        factor = float(straggler.get("energy_factor", 0.2))
        d = devices[i]
        devices[i] = DeviceParams(**{**asdict(d), "E_budget": d.E_budget * factor})

    sc = Scenario(system=system, devices=devices,
                  strategy=overrides.pop("strategy", PROPOSED),
                  data=data, training=training,
                  seeds=list(overrides.pop("seeds", [0])),
                  search=SearchConfig(**overrides.pop("search", {})),
                  sweep=overrides.pop("sweep", None))
    if overrides:
        raise ConfigError(f"unknown override keys: {sorted(overrides)}")
    return sc


# JSON field tables: dataclass field -> unit-suffixed JSON key.
_SYS_KEYS = {"T_s": "T_s_s", "T_th": "T_th_s", "E_G": "E_G", "z": "z_bits",
             "alpha_p": "alpha_p", "ps_min": "ps_min_W", "ps_max": "ps_max_W",
             "pc_min": "pc_min_W", "pc_max": "pc_max_W", "Ls_max": "Ls_max"}
_DEV_KEYS = {"tau": "tau_s", "d_target": "d_target_m", "d_server": "d_server_m",
             "G": "G_linear", "omega_s": "omega_s", "omega_c": "omega_c",
             "sigma2_s": "sigma2_s_W", "sigma2_c": "sigma2_c_W", "B": "B_Hz",
             "E_budget": "E_budget_J", "kappa": "kappa_J", "T_train": "T_train_s"}
_UNIT_SUFFIXES = ("_W", "_J", "_s", "_m", "_Hz", "_bits", "_dBi", "_linear")


def _strip_unit(key: str) -> str:
    for suf in _UNIT_SUFFIXES:
        if key.endswith(suf) and key != "omega_s":
            return key[: -len(suf)]
    return key


def _normalize_device_keys(d: dict) -> dict:
    """Unit-suffixed (or bare) device override keys to field names."""
    d = dict(d)
    if "G_dBi" in d:
        d["G"] = float(from_db(d.pop("G_dBi")))
    return {_strip_unit(k): v for k, v in d.items()}


def scenario_to_dict(sc: Scenario) -> dict:
    return {
        "system": {json_k: getattr(sc.system, f) for f, json_k in _SYS_KEYS.items()},
        "devices": [{json_k: getattr(d, f) for f, json_k in _DEV_KEYS.items()}
                    for d in sc.devices],
        "strategy": sc.strategy,
        "data": asdict(sc.data),
        "training": {**asdict(sc.training), "hidden": list(sc.training.hidden)},
        "seeds": list(sc.seeds),
        "search": {"tol": sc.search.tol, "max_iter": sc.search.max_iter},
        "sweep": sc.sweep,
    }


def _device_from_dict(d: dict) -> DeviceParams:
    d = dict(d)
    if "G_dBi" in d:
        d["G_linear"] = float(from_db(d.pop("G_dBi")))
    kw = {}
    for f, json_k in _DEV_KEYS.items():
        if json_k not in d:
            raise ConfigError(f"device entry missing {json_k!r}")
        kw[f] = d.pop(json_k)
    if d:
        raise ConfigError(f"unknown device keys: {sorted(d)}")
    return DeviceParams(**kw)


def scenario_from_dict(obj: dict) -> Scenario:
    try:
        sys_in = dict(obj["system"])
        kw = {f: sys_in.pop(json_k) for f, json_k in _SYS_KEYS.items()}
        if sys_in:
            raise ConfigError(f"unknown system keys: {sorted(sys_in)}")
        system = SystemParams(**kw)
        devices = [_device_from_dict(d) for d in obj["devices"]]
        training_kw = dict(obj.get("training", {}))
        if "hidden" in training_kw:
            training_kw["hidden"] = tuple(training_kw["hidden"])
        return Scenario(
            system=system,
            devices=devices,
            strategy=obj.get("strategy", PROPOSED),
            data=DataConfig(**obj.get("data", {})),
            training=TrainConfig(**training_kw),
            seeds=list(obj.get("seeds", [0])),
            search=SearchConfig(**obj.get("search", {"tol": None, "max_iter": 200})),
            sweep=obj.get("sweep"),
        )
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad scenario config: {exc}") from exc


def save_scenario(sc: Scenario, path: str | Path) -> None:
    Path(path).write_text(json.dumps(scenario_to_dict(sc), indent=2) + "\n")


def load_scenario(path: str | Path) -> Scenario:
    try:
        obj = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read scenario {path}: {exc}") from exc
    return scenario_from_dict(obj)
