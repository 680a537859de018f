"""ANN-to-SNN conversion by layer-wise weight normalization.

Each weighted layer l is rescaled by lambda[l-1] / lambda[l], where lambda[l]
is the largest activation the layer produces (data-based) or can produce
(model-based). Every spiking layer then uses a threshold of 1.0, and firing
rates approximate the normalized ReLU activations.
"""
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np

from .ann import LINEAR_KINDS, SCHEMA_VERSION, AnnModel, Layer, as_batch
from .ann import layer_forward, layer_from_dict, layer_to_dict
from .ann import read_document, write_document
from .errors import MissingStatsError, SchemaError
from .mnist import Dataset

LAMBDA_FLOOR = 1e-9
DEFAULT_THRESHOLD = 1.0
NORM_METHODS = ("data", "model")


@dataclass
class ActivationStats:
    """Per-layer scale factors. lambdas[0] describes the input, lambdas[l]
    the l-th weighted layer."""

    lambdas: List[float]
    method: str = "data"


@dataclass
class SnnLayer(Layer):
    threshold: Optional[float] = None


@dataclass
class SnnNetwork:
    layers: List[SnnLayer]
    input_shape: Tuple[int, ...]
    normalization: ActivationStats = field(default_factory=lambda: ActivationStats([]))

    def __post_init__(self):
        self.input_shape = tuple(int(d) for d in self.input_shape)
        for layer in self.layers:
            if layer.kind not in LINEAR_KINDS:
                err = "Spiking networks only hold linear layers, found '{}'"
                raise SchemaError(err.format(layer.kind))
            if layer.has_weights and not (layer.threshold and layer.threshold > 0):
                err = "Spiking layer '{}' needs a positive threshold, got {}"
                raise SchemaError(err.format(layer.kind, layer.threshold))
        self.layer_shapes()

    def layer_shapes(self) -> List[Tuple[int, ...]]:
        """RETURNS (List[Tuple[int, ...]]): Per-sample output shape of every layer."""
        shapes = []
        shape = self.input_shape
        for layer in self.layers:
            shape = layer.output_shape(shape)
            shapes.append(shape)
        return shapes

    @property
    def spiking_layers(self) -> List[int]:
        """RETURNS (List[int]): Indices of the layers made of IF neurons."""
        return [i for i, layer in enumerate(self.layers) if layer.has_weights]


def _activation_index(model: AnnModel, i: int) -> int:
    # The activation of a weighted layer is read after its ReLU, if any.
    layers = model.layers
    if i + 1 < len(layers) and layers[i + 1].kind == "relu":
        return i + 1
    return i


def collect_max_activations(
    model: AnnModel, sample: Union[Dataset, np.ndarray], batch_size: int = 500
) -> ActivationStats:
    """Record the largest activation of every weighted layer over a sample
    (data-based normalization).

    model (AnnModel): The trained network.
    sample (Union[Dataset, np.ndarray]): Inputs to run through the network.
    batch_size (int): Number of samples per forward pass.
    RETURNS (ActivationStats): lambda[0] = max input, lambda[l] = max
        post-ReLU activation of the l-th weighted layer, floored at 1e-9.
    """
    images = sample.images if isinstance(sample, Dataset) else np.asarray(sample)
    x = as_batch(model, images)
    if len(x) == 0:
        raise ValueError("Cannot collect activation statistics from an empty sample")
    indices = [_activation_index(model, i) for i in model.param_layers]
    maxima = np.full(len(indices) + 1, -np.inf)
    for start in range(0, len(x), batch_size):
        out = x[start : start + batch_size]
        maxima[0] = max(maxima[0], out.max())
        outputs = []
        for layer in model.layers:
            out = layer_forward(layer, out)
            outputs.append(out)
        for k, idx in enumerate(indices, start=1):
            maxima[k] = max(maxima[k], outputs[idx].max())
    lambdas = [max(float(m), LAMBDA_FLOOR) for m in maxima]
    return ActivationStats(lambdas, method="data")


def collect_max_weights(model: AnnModel, input_max: float = 1.0) -> ActivationStats:
    """Bound every weighted layer's activation from the weights alone
    (model-based normalization): a unit can receive at most the sum of its
    positive incoming weights times the bound of its inputs.

    model (AnnModel): The trained network.
    input_max (float): Largest possible input value.
    RETURNS (ActivationStats): The worst-case scale factors.
    """
    lambdas = [max(float(input_max), LAMBDA_FLOOR)]
    for i in model.param_layers:
        weights = model.layers[i].weights
        positive = np.maximum(weights, 0.0).reshape(len(weights), -1).sum(axis=1)
        lambdas.append(max(float(positive.max()) * lambdas[-1], LAMBDA_FLOOR))
    return ActivationStats(lambdas, method="model")


def collect_stats(
    model: AnnModel, sample: Union[Dataset, np.ndarray], method: str = "data"
) -> ActivationStats:
    """Dispatch to the data- or model-based statistics."""
    if method == "data":
        return collect_max_activations(model, sample)
    if method == "model":
        images = sample.images if isinstance(sample, Dataset) else np.asarray(sample)
        return collect_max_weights(model, input_max=float(np.max(images)))
    raise ValueError("Unknown normalization method: {}".format(method))


def _check_stats(model: AnnModel, stats: ActivationStats) -> None:
    expected = len(model.param_layers) + 1
    if len(stats.lambdas) != expected:
        err = "Normalization needs {} scale factors (input + {} weighted layers), got {}"
        raise MissingStatsError(err.format(expected, expected - 1, len(stats.lambdas)))


def normalize_model(model: AnnModel, stats: ActivationStats) -> AnnModel:
    """Rescale the weights of an ANN, keeping its ReLUs. The result computes
    the original activations divided by their layer's lambda.

    model (AnnModel): The trained network.
    stats (ActivationStats): Scale factors covering every weighted layer.
    RETURNS (AnnModel): The normalized copy.
    """
    _check_stats(model, stats)
    normalized = model.copy()
    lambdas = stats.lambdas
    for k, i in enumerate(normalized.param_layers, start=1):
        layer = normalized.layers[i]
        layer.weights = layer.weights * (lambdas[k - 1] / lambdas[k])
    return normalized


def normalize_and_convert(
    model: AnnModel, stats: ActivationStats, threshold: float = DEFAULT_THRESHOLD
) -> SnnNetwork:
    """Convert a trained bias-free ReLU network into a spiking network.

    model (AnnModel): The trained network.
    stats (ActivationStats): Scale factors covering every weighted layer.
    threshold (float): Firing threshold of every spiking layer.
    RETURNS (SnnNetwork): Normalized weights, ReLUs dropped, pooling and
        flatten layers kept as they are.
    """
    normalized = normalize_model(model, stats)
    layers = []
    for layer in normalized.layers:
        if layer.kind == "relu":
            continue
        layers.append(
            SnnLayer(
                layer.kind,
                layer.weights,
                dict(layer.hyper),
                threshold=threshold if layer.has_weights else None,
            )
        )
    norm = ActivationStats(list(stats.lambdas), stats.method)
    return SnnNetwork(layers, model.input_shape, norm)


def save_snn(net: SnnNetwork, path: Union[str, Path]) -> None:
    """Write a spiking network to a JSON document (the model schema plus
    per-layer thresholds and the normalization record).

    net (SnnNetwork): The network to save.
    path (Union[str, Path]): The output file.
    """
    layers = []
    for layer in net.layers:
        record = layer_to_dict(layer)
        record["threshold"] = layer.threshold
        layers.append(record)
    data: Dict[str, Any] = {
        "version": SCHEMA_VERSION,
        "input_shape": list(net.input_shape),
        "layers": layers,
        "normalization": {
            "lambdas": list(net.normalization.lambdas),
            "method": net.normalization.method,
        },
    }
    write_document(path, data)


def load_snn(path: Union[str, Path]) -> SnnNetwork:
    """Read a spiking network written by save_snn.

    path (Union[str, Path]): The network file.
    RETURNS (SnnNetwork): The loaded network.
    """
    data = read_document(path)
    if "normalization" not in data:
        raise SchemaError("{} is not a spiking network file".format(path))
    layers = []
    for record in data["layers"]:
        layer = layer_from_dict(record)
        threshold = record.get("threshold")
        layers.append(
            SnnLayer(
                layer.kind,
                layer.weights,
                layer.hyper,
                threshold=float(threshold) if threshold is not None else None,
            )
        )
    norm = data["normalization"]
    stats = ActivationStats(
        [float(v) for v in norm.get("lambdas", [])], norm.get("method", "data")
    )
    return SnnNetwork(layers, tuple(data["input_shape"]), stats)
