"""FedAvg simulator: datasets, models, protocol, probes and validation."""

from .data import Dataset, Partition, add_awgn_at_snr, corrupt_at_snr, load_mnist, make_synthetic, partition
from .models import MLP, QuadraticModel, SoftmaxRegression, build_model, model_size_bits
from .probe import ProbeCell, fit_sigma0_sq_envelope, fit_sigma0_sq_ls, gradient_variance_probe
from .quadratic import QuadraticFleet, gap_bound_for_fleet, run_gap_trials
from .rng import substream
from .training import FedConfig, RoundLog, aggregate, local_train, run_federated, sample_uploads

__all__ = [
    "Dataset", "FedConfig", "MLP", "Partition", "ProbeCell", "QuadraticFleet",
    "QuadraticModel", "RoundLog", "SoftmaxRegression", "add_awgn_at_snr",
    "aggregate", "build_model", "corrupt_at_snr", "fit_sigma0_sq_envelope",
    "fit_sigma0_sq_ls", "gap_bound_for_fleet", "gradient_variance_probe",
    "load_mnist", "local_train", "make_synthetic", "model_size_bits",
    "partition", "run_federated", "run_gap_trials", "sample_uploads",
    "substream",
]
