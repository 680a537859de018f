"""A small bias-free ReLU network with hand-written backpropagation.

Activations are float64 numpy arrays laid out [batch, *shape]; convolutions
use [batch, channels, rows, cols]. Supported layer kinds: dense, conv2d,
avgpool2d, relu and flatten.
"""
import copy
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import NonFiniteLossError, SchemaError, ShapeMismatchError
from .mnist import Dataset
from .util import ensure_path, msg

SCHEMA_VERSION = 1
LAYER_KINDS = ("dense", "conv2d", "avgpool2d", "relu", "flatten")
PARAM_KINDS = ("dense", "conv2d")
LINEAR_KINDS = ("dense", "conv2d", "avgpool2d", "flatten")

Shape = Tuple[int, ...]


@dataclass
class Layer:
    kind: str
    weights: Optional[np.ndarray] = None
    hyper: Dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in LAYER_KINDS:
            raise SchemaError("Unknown layer kind: {}".format(self.kind))
        if self.kind in PARAM_KINDS:
            if self.weights is None:
                raise SchemaError("Layer '{}' needs weights".format(self.kind))
            ndim = 2 if self.kind == "dense" else 4
            if self.weights.ndim != ndim:
                err = "Layer '{}' expects {}-d weights, got shape {}"
                raise ShapeMismatchError(
                    err.format(self.kind, ndim, list(self.weights.shape))
                )
            if not np.all(np.isfinite(self.weights)):
                raise SchemaError("Layer '{}' has non-finite weights".format(self.kind))

    @property
    def has_weights(self) -> bool:
        return self.kind in PARAM_KINDS

    def output_shape(self, shape: Shape) -> Shape:
        """Infer the per-sample output shape for a given input shape.

        shape (Shape): The per-sample input shape.
        RETURNS (Shape): The per-sample output shape.
        """
        if self.kind == "dense":
            if shape != (self.weights.shape[1],):
                raise _shape_error(self, (self.weights.shape[1],), shape)
            return (self.weights.shape[0],)
        if self.kind == "conv2d":
            out_ch, in_ch, kh, kw = self.weights.shape
            if len(shape) != 3 or shape[0] != in_ch or shape[1] < kh or shape[2] < kw:
                raise _shape_error(self, (in_ch, kh, kw), shape)
            stride = self.hyper.get("stride", 1)
            return (out_ch, (shape[1] - kh) // stride + 1, (shape[2] - kw) // stride + 1)
        if self.kind == "avgpool2d":
            size = self.hyper.get("size", 2)
            if len(shape) != 3 or shape[1] % size or shape[2] % size:
                err = "avgpool2d of size {} cannot pool input of shape {}"
                raise ShapeMismatchError(err.format(size, list(shape)))
            return (shape[0], shape[1] // size, shape[2] // size)
        if self.kind == "flatten":
            return (int(np.prod(shape)),)
        return shape


def _shape_error(layer: Layer, expected: Shape, got: Shape) -> ShapeMismatchError:
    err = "Layer '{}' expects input compatible with {}, got {}"
    return ShapeMismatchError(err.format(layer.kind, list(expected), list(got)))


@dataclass
class AnnModel:
    layers: List[Layer]
    input_shape: Shape

    def __post_init__(self):
        self.input_shape = tuple(int(d) for d in self.input_shape)
        self.layer_shapes()

    def layer_shapes(self) -> List[Shape]:
        """RETURNS (List[Shape]): Per-sample output shape of every layer."""
        shapes = []
        shape = self.input_shape
        for layer in self.layers:
            shape = layer.output_shape(shape)
            shapes.append(shape)
        return shapes

    @property
    def output_shape(self) -> Shape:
        shapes = self.layer_shapes()
        return shapes[-1] if shapes else self.input_shape

    @property
    def param_layers(self) -> List[int]:
        """RETURNS (List[int]): Indices of the layers that carry weights."""
        return [i for i, layer in enumerate(self.layers) if layer.has_weights]

    def copy(self) -> "AnnModel":
        return copy.deepcopy(self)


def as_batch(model: AnnModel, x: np.ndarray) -> np.ndarray:
    """Reshape samples to [batch, *input_shape]. A single sample gets a batch
    axis of size one; flat or channel-less images are reshaped if their
    size matches.

    model (AnnModel): The model defining the input shape.
    x (np.ndarray): One sample or a batch of samples.
    RETURNS (np.ndarray): The float64 batch.
    """
    x = np.asarray(x, dtype=np.float64)
    shape = model.input_shape
    size = int(np.prod(shape))
    if x.shape == shape:
        return x[np.newaxis]
    if x.ndim >= 1 and x.shape[1:] == shape:
        return x
    if x.ndim >= 1 and len(x) and x[0].size == size:
        return x.reshape((len(x),) + shape)
    if x.size == size:
        return x.reshape((1,) + shape)
    err = "Input of shape {} does not match model input shape {}"
    raise ShapeMismatchError(err.format(list(x.shape), list(shape)))


def _windows(x: np.ndarray, kh: int, kw: int, stride: int) -> np.ndarray:
    # [B, C, Ho, Wo, kh, kw]
    return sliding_window_view(x, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride]


def layer_forward(layer: Layer, x: np.ndarray) -> np.ndarray:
    """Apply one layer to a batch."""
    if layer.kind == "dense":
        return x @ layer.weights.T
    if layer.kind == "conv2d":
        _, _, kh, kw = layer.weights.shape
        windows = _windows(x, kh, kw, layer.hyper.get("stride", 1))
        out = np.tensordot(windows, layer.weights, axes=([1, 4, 5], [1, 2, 3]))
        return out.transpose(0, 3, 1, 2)
    if layer.kind == "avgpool2d":
        k = layer.hyper.get("size", 2)
        b, c, h, w = x.shape
        return x.reshape(b, c, h // k, k, w // k, k).mean(axis=(3, 5))
    if layer.kind == "relu":
        return np.maximum(x, 0.0)
    return x.reshape(len(x), -1)


def layer_backward(
    layer: Layer, x: np.ndarray, dout: np.ndarray
) -> Tuple[np.ndarray, Optional[np.ndarray]]:
    """Backpropagate through one layer.

    layer (Layer): The layer.
    x (np.ndarray): The layer's input batch from the forward pass.
    dout (np.ndarray): Gradient of the loss w.r.t. the layer's output.
    RETURNS (Tuple[np.ndarray, Optional[np.ndarray]]): Gradient w.r.t. the
        input and w.r.t. the weights (None for layers without weights).
    """
    if layer.kind == "dense":
        return dout @ layer.weights, dout.T @ x
    if layer.kind == "conv2d":
        _, _, kh, kw = layer.weights.shape
        stride = layer.hyper.get("stride", 1)
        windows = _windows(x, kh, kw, stride)
        dw = np.tensordot(dout, windows, axes=([0, 2, 3], [0, 2, 3]))
        dx = np.zeros_like(x)
        ho, wo = dout.shape[2], dout.shape[3]
        for i in range(kh):
            for j in range(kw):
                contrib = np.tensordot(dout, layer.weights[:, :, i, j], axes=([1], [0]))
                rows = slice(i, i + stride * (ho - 1) + 1, stride)
                cols = slice(j, j + stride * (wo - 1) + 1, stride)
                dx[:, :, rows, cols] += contrib.transpose(0, 3, 1, 2)
        return dx, dw
    if layer.kind == "avgpool2d":
        k = layer.hyper.get("size", 2)
        dx = np.repeat(np.repeat(dout, k, axis=2), k, axis=3) / (k * k)
        return dx, None
    if layer.kind == "relu":
        return dout * (x > 0), None
    return dout.reshape(x.shape), None


def forward(
    model: AnnModel, x: np.ndarray, record: bool = False
) -> Union[np.ndarray, Tuple[np.ndarray, List[np.ndarray]]]:
    """Run the network on one sample or a batch.

    model (AnnModel): The network.
    x (np.ndarray): One sample (shape == input_shape) or a batch.
    record (bool): Also return the output of every layer.
    RETURNS: The output (without batch axis for a single sample), plus the
        list of per-layer outputs when record is set.
    """
    x = np.asarray(x, dtype=np.float64)
    single = x.shape == model.input_shape
    out = as_batch(model, x)
    activations = []
    for layer in model.layers:
        out = layer_forward(layer, out)
        if record:
            activations.append(out[0] if single else out)
    result = out[0] if single else out
    if record:
        return result, activations
    return result


def softmax_cross_entropy(
    logits: np.ndarray, labels: np.ndarray
) -> Tuple[float, np.ndarray]:
    """Mean softmax cross-entropy and its gradient w.r.t. the logits."""
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    log_probs = shifted - log_norm
    n = len(labels)
    loss = -float(log_probs[np.arange(n), labels].mean())
    grad = np.exp(log_probs)
    grad[np.arange(n), labels] -= 1.0
    return loss, grad / n


def _check_labels(model: AnnModel, labels: np.ndarray) -> None:
    n_classes = model.output_shape[0]
    if labels.size and (labels.min() < 0 or labels.max() >= n_classes):
        err = "Labels must lie in 0..{} for a model with {} outputs"
        raise ShapeMismatchError(err.format(n_classes - 1, n_classes))


def loss_and_grad(
    model: AnnModel, batch: Tuple[np.ndarray, np.ndarray]
) -> Tuple[float, List[Optional[np.ndarray]]]:
    """Compute the mean softmax cross-entropy of a batch and the gradient of
    every layer's weights.

    model (AnnModel): The network.
    batch (Tuple[np.ndarray, np.ndarray]): Inputs and integer labels.
    RETURNS (Tuple[float, List[Optional[np.ndarray]]]): The loss and one
        gradient per layer (None for layers without weights).
    """
    x, labels = batch
    labels = np.asarray(labels, dtype=np.int64)
    x = as_batch(model, x)
    if len(x) == 0 or len(x) != len(labels):
        err = "Batch has {} inputs and {} labels".format(len(x), len(labels))
        raise ShapeMismatchError(err)
    _check_labels(model, labels)
    inputs = []
    out = x
    for layer in model.layers:
        inputs.append(out)
        out = layer_forward(layer, out)
    loss, dout = softmax_cross_entropy(out, labels)
    grads: List[Optional[np.ndarray]] = [None] * len(model.layers)
    for i in reversed(range(len(model.layers))):
        dout, grads[i] = layer_backward(model.layers[i], inputs[i], dout)
    return loss, grads


def predict(model: AnnModel, images: np.ndarray, batch_size: int = 500) -> np.ndarray:
    """Classify samples by argmax, ties going to the smaller class index.

    model (AnnModel): The network.
    images (np.ndarray): Samples, reshaped to the model input if needed.
    batch_size (int): Number of samples per forward pass.
    RETURNS (np.ndarray): Predicted class per sample.
    """
    x = as_batch(model, images) if len(images) else np.zeros((0,) + model.input_shape)
    preds = [
        np.argmax(forward(model, x[i : i + batch_size]), axis=1)
        for i in range(0, len(x), batch_size)
    ]
    return np.concatenate(preds) if preds else np.zeros(0, dtype=np.int64)


def evaluate(model: AnnModel, ds: Dataset) -> float:
    """RETURNS (float): Classification error rate of the model on ds."""
    if len(ds) == 0:
        return 0.0
    _check_labels(model, ds.labels)
    return float(np.mean(predict(model, ds.images) != ds.labels))


@dataclass
class EpochLog:
    epoch: int
    loss: float
    accuracy: float


def train(
    model: AnnModel,
    train_set: Dataset,
    epochs: int = 3,
    batch_size: int = 32,
    lr: float = 0.05,
    seed: int = 0,
    verbose: bool = False,
) -> Tuple[AnnModel, List[EpochLog]]:
    """Train with plain minibatch SGD. The input model is left unchanged.

    model (AnnModel): The initial network.
    train_set (Dataset): Training data.
    epochs (int): Number of passes over the data.
    batch_size (int): Minibatch size.
    lr (float): Learning rate.
    seed (int): Seed of the per-epoch shuffling.
    verbose (bool): Print one line per epoch.
    RETURNS (Tuple[AnnModel, List[EpochLog]]): The trained network and the
        mean loss and training accuracy of every epoch.
    """
    if epochs < 1:
        raise ValueError("epochs must be >= 1, got {}".format(epochs))
    if lr < 0:
        raise ValueError("Learning rate must be non-negative, got {}".format(lr))
    model = model.copy()
    x = as_batch(model, train_set.images)
    labels = train_set.labels
    rng = np.random.default_rng(seed)
    log = []
    for epoch in range(1, epochs + 1):
        order = rng.permutation(len(x))
        losses = []
        for start in range(0, len(x), batch_size):
            idx = order[start : start + batch_size]
            loss, grads = loss_and_grad(model, (x[idx], labels[idx]))
            if not np.isfinite(loss):
                err = "Loss became {} in epoch {} (learning rate {})"
                raise NonFiniteLossError(err.format(loss, epoch, lr))
            losses.append(loss)
            for layer, grad in zip(model.layers, grads):
                if grad is not None:
                    layer.weights -= lr * grad
        accuracy = 1.0 - evaluate(model, train_set)
        log.append(EpochLog(epoch, float(np.mean(losses)), accuracy))
        msg.text(
            "Epoch {}: loss {:.4f}, train accuracy {:.4f}".format(
                epoch, log[-1].loss, accuracy
            ),
            show=verbose,
        )
    return model, log


def init_model(
    layer_specs: Sequence[Dict[str, Any]], input_shape: Sequence[int], seed: int = 0
) -> AnnModel:
    """Build a model from compact layer descriptions, initializing weights
    uniformly in +-sqrt(6 / (fan_in + fan_out)).

    layer_specs (Sequence[Dict[str, Any]]): One dict per layer, e.g.
        {"kind": "conv2d", "out_channels": 6, "kernel": 5},
        {"kind": "dense", "units": 10}, {"kind": "avgpool2d", "size": 2},
        {"kind": "relu"} or {"kind": "flatten"}.
    input_shape (Sequence[int]): Per-sample input shape.
    seed (int): Seed of the initializer.
    RETURNS (AnnModel): The initialized model.
    """
    rng = np.random.default_rng(seed)
    shape: Shape = tuple(input_shape)
    layers = []
    for spec in layer_specs:
        kind = spec["kind"]
        if kind == "dense":
            n_in, n_out = int(np.prod(shape)), spec["units"]
            limit = np.sqrt(6.0 / (n_in + n_out))
            layer = Layer(kind, rng.uniform(-limit, limit, size=(n_out, n_in)))
        elif kind == "conv2d":
            k = spec["kernel"]
            out_ch, in_ch = spec["out_channels"], shape[0]
            limit = np.sqrt(6.0 / ((in_ch + out_ch) * k * k))
            weights = rng.uniform(-limit, limit, size=(out_ch, in_ch, k, k))
            layer = Layer(kind, weights, {"stride": spec.get("stride", 1)})
        elif kind == "avgpool2d":
            layer = Layer(kind, hyper={"size": spec.get("size", 2)})
        else:
            layer = Layer(kind)
        shape = layer.output_shape(shape)
        layers.append(layer)
    return AnnModel(layers, tuple(input_shape))


# fmt: off
LENET5 = [
    {"kind": "conv2d", "out_channels": 6, "kernel": 5},
    {"kind": "relu"},
    {"kind": "avgpool2d", "size": 2},
    {"kind": "conv2d", "out_channels": 16, "kernel": 5},
    {"kind": "relu"},
    {"kind": "avgpool2d", "size": 2},
    {"kind": "flatten"},
    {"kind": "dense", "units": 120},
    {"kind": "relu"},
    {"kind": "dense", "units": 84},
    {"kind": "relu"},
    {"kind": "dense", "units": 10},
]
# fmt: on

ARCHITECTURES = {"lenet5": LENET5}


def lenet5(seed: int = 0) -> AnnModel:
    """RETURNS (AnnModel): The LeNet-5-style reference network for 28x28 inputs."""
    return init_model(LENET5, (1, 28, 28), seed=seed)


def layer_to_dict(layer: Layer) -> Dict[str, Any]:
    weights = layer.weights if layer.weights is not None else np.zeros(0)
    return {
        "kind": layer.kind,
        "hyper": dict(layer.hyper),
        "shape": list(weights.shape) if layer.weights is not None else [],
        "weights": weights.ravel().tolist(),
    }


def layer_from_dict(data: Dict[str, Any]) -> Layer:
    kind = data.get("kind") if isinstance(data, dict) else None
    if kind not in LAYER_KINDS:
        raise SchemaError("Unknown layer kind: {}".format(kind))
    try:
        hyper = {k: int(v) for k, v in data.get("hyper", {}).items()}
        if kind not in PARAM_KINDS:
            return Layer(kind, hyper=hyper)
        shape = tuple(int(d) for d in data["shape"])
        weights = np.asarray(data["weights"], dtype=np.float64)
    except (KeyError, TypeError, ValueError) as e:
        raise SchemaError("Malformed '{}' layer record: {}".format(kind, e))
    if weights.size != int(np.prod(shape)):
        err = "Layer '{}' declares shape {} but holds {} weights"
        raise SchemaError(err.format(kind, list(shape), weights.size))
    return Layer(kind, weights.reshape(shape), hyper)


def read_document(path: Union[str, Path]) -> Dict[str, Any]:
    """Read a versioned JSON network document."""
    text = ensure_path(path).read_text(encoding="utf8")
    if not text.strip():
        raise SchemaError("Network file is empty: {}".format(path))
    try:
        data = json.loads(text)
    except ValueError as e:
        raise SchemaError("Network file {} is not valid JSON: {}".format(path, e))
    if not isinstance(data, dict) or data.get("version") != SCHEMA_VERSION:
        version = data.get("version") if isinstance(data, dict) else None
        err = "Unsupported network file version in {}: {!r} (expected {})"
        raise SchemaError(err.format(path, version, SCHEMA_VERSION))
    if "input_shape" not in data or "layers" not in data:
        raise SchemaError("Network file {} lacks input_shape or layers".format(path))
    return data


def write_document(path: Union[str, Path], data: Dict[str, Any]) -> None:
    # json writes floats with repr(), which round-trips float64 exactly
    ensure_path(path).write_text(json.dumps(data, indent=1), encoding="utf8")


def save_model(model: AnnModel, path: Union[str, Path]) -> None:
    """Write a model to a JSON document.

    model (AnnModel): The model to save.
    path (Union[str, Path]): The output file.
    """
    data = {
        "version": SCHEMA_VERSION,
        "input_shape": list(model.input_shape),
        "layers": [layer_to_dict(layer) for layer in model.layers],
    }
    write_document(path, data)


def load_model(path: Union[str, Path]) -> AnnModel:
    """Read a model written by save_model.

    path (Union[str, Path]): The model file.
    RETURNS (AnnModel): The loaded model.
    """
    data = read_document(path)
    layers = [layer_from_dict(layer) for layer in data["layers"]]
    return AnnModel(layers, tuple(data["input_shape"]))
