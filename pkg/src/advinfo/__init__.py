"""Information-plane probes for normally and adversarially trained classifiers."""

from .attacks import AttackConfig, pgd_attack
from .data import Dataset, load_mnist, synth_blobs
from .distortions import patch_shuffle, saturate
from .estimators import BinConfig, KdeConfig, binning_mi, discrete_entropy, kde_mi_input, kde_mi_label
from .models import Network, build_lenet5, build_toy_mlp
from .training import TrainConfig

__version__ = "0.1.0"

__all__ = [
    "AttackConfig",
    "BinConfig",
    "Dataset",
    "KdeConfig",
    "Network",
    "TrainConfig",
    "binning_mi",
    "build_lenet5",
    "build_toy_mlp",
    "discrete_entropy",
    "kde_mi_input",
    "kde_mi_label",
    "load_mnist",
    "patch_shuffle",
    "pgd_attack",
    "saturate",
    "synth_blobs",
]
