from .ann import AnnModel, Layer, lenet5, load_model, save_model  # noqa
from .config import RunConfig, load_config  # noqa
from .convert import ActivationStats, SnnNetwork, collect_stats  # noqa
from .convert import load_snn, normalize_and_convert, save_snn  # noqa
from .errors import SpikesimError  # noqa
from .mnist import Dataset, load_idx_images, load_idx_labels, load_mnist  # noqa
from .neuron import AccumulationModel, IdealModel, RescaledModel  # noqa
from .neuron import TableModel, TimeDomainModel, VoltageClmModel  # noqa
from .neuron import increment, make_model, neutral_point, potential_curve  # noqa
from .neuron import rescale  # noqa
from .sim import SimConfig, demo_neutral_point, run_dataset, run_image  # noqa
from .util import msg  # noqa

# fmt: off
__all__ = [
    "collect_stats",
    "demo_neutral_point",
    "increment",
    "lenet5",
    "load_config",
    "load_idx_images",
    "load_idx_labels",
    "load_mnist",
    "load_model",
    "load_snn",
    "make_model",
    "msg",
    "neutral_point",
    "normalize_and_convert",
    "potential_curve",
    "rescale",
    "run_dataset",
    "run_image",
    "save_model",
    "save_snn",
    "AccumulationModel",
    "ActivationStats",
    "AnnModel",
    "Dataset",
    "IdealModel",
    "Layer",
    "RescaledModel",
    "RunConfig",
    "SimConfig",
    "SnnNetwork",
    "SpikesimError",
    "TableModel",
    "TimeDomainModel",
    "VoltageClmModel",
]
# fmt: on
