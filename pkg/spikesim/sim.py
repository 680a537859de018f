"""Timestep simulation of converted spiking networks.

Every timestep the input image is encoded as spikes (or currents), and each
spiking layer integrates its incoming events, fires where the potential
reaches the threshold and subtracts the threshold from the neurons that
fired. All layers advance within the same timestep.
"""
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .ann import Layer, layer_forward
from .convert import SnnNetwork
from .mnist import Dataset
from .neuron import AccumulationModel, IdealModel, VoltageClmModel, neutral_point
from .rng import uniform
from .util import format_percent, msg

INPUT_MODES = ("poisson", "constant_current")
EVENT_ORDERS = ("per_event", "aggregated", "simultaneous")
STABLE_FRACTION = 0.1
BASIS_CHUNK = 256


@dataclass(frozen=True)
class SimConfig:
    timesteps: int = 300
    input_mode: str = "poisson"
    max_rate: float = 1.0
    seed: int = 0
    event_order: str = "per_event"
    model: AccumulationModel = field(default_factory=IdealModel)

    def __post_init__(self):
        if self.timesteps < 1:
            raise ValueError("timesteps must be >= 1, got {}".format(self.timesteps))
        if self.input_mode not in INPUT_MODES:
            raise ValueError("Unknown input mode: {}".format(self.input_mode))
        if not 0 < self.max_rate <= 1:
            raise ValueError("max_rate must lie in (0, 1], got {}".format(self.max_rate))
        if self.event_order not in EVENT_ORDERS:
            raise ValueError("Unknown event order: {}".format(self.event_order))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "timesteps": self.timesteps,
            "input_mode": self.input_mode,
            "max_rate": self.max_rate,
            "seed": self.seed,
            "event_order": self.event_order,
            "model": self.model.to_dict(),
        }


def encode_input(
    pixel: Union[float, np.ndarray],
    t: int,
    mode: str = "poisson",
    seed: int = 0,
    image_index: int = 0,
    pixel_index: Union[int, np.ndarray] = 0,
    max_rate: float = 1.0,
) -> Union[float, np.ndarray]:
    """Encode pixel intensities for one timestep.

    pixel (Union[float, np.ndarray]): Intensity in [0, 1], or an array of them.
    t (int): Timestep.
    mode (str): "poisson" for spikes, "constant_current" for currents.
    seed (int): Run seed.
    image_index (int): Index of the image within its dataset.
    pixel_index (Union[int, np.ndarray]): Index of the pixel(s); defaults to
        0 for a scalar and to arange(len(pixel)) for an array.
    max_rate (float): Rate of a pixel of intensity 1.
    RETURNS (Union[float, np.ndarray]): Spike (0 or 1) or current per pixel.
    """
    pixel = np.asarray(pixel, dtype=np.float64)
    rate = pixel * max_rate
    if mode == "constant_current":
        out = rate
    elif mode == "poisson":
        if pixel.ndim and np.ndim(pixel_index) == 0 and pixel_index == 0:
            pixel_index = np.arange(pixel.size).reshape(pixel.shape)
        draws = uniform(seed, image_index, np.asarray(pixel_index), t)
        out = (draws < rate).astype(np.float64)
        if not pixel.ndim:
            out = out.reshape(())
    else:
        raise ValueError("Unknown input mode: {}".format(mode))
    return float(out) if out.ndim == 0 else out


@dataclass
class LayerState:
    """Membrane potentials, last output spikes and cumulative spike counts
    of one population of IF neurons."""

    v: np.ndarray
    spikes_out: np.ndarray
    spike_counts: np.ndarray

    @classmethod
    def zeros(cls, n: int) -> "LayerState":
        return cls(np.zeros(n), np.zeros(n, dtype=bool), np.zeros(n, dtype=np.int64))


def _simultaneous(
    model: AccumulationModel, v: np.ndarray, weights: np.ndarray, inputs: np.ndarray, active: np.ndarray
) -> np.ndarray:
    total = np.zeros_like(v)
    for j in active:
        total += model.advance(v, weights[j] * inputs[j]) - v
    new_v = v + total
    if model.bounds is not None:
        new_v = np.clip(new_v, *model.bounds)
    return new_v


def step_layer(
    state: LayerState,
    weights: np.ndarray,
    incoming_spikes: np.ndarray,
    model: AccumulationModel,
    threshold: float,
    order: str = "per_event",
) -> np.ndarray:
    """Advance one population by one timestep.

    state (LayerState): The population, updated in place.
    weights (np.ndarray): Weight matrix [n_in, n_out]; row j holds the
        weights of presynaptic input j.
    incoming_spikes (np.ndarray): Input events [n_in] (0/1 spikes, or
        currents for analog inputs).
    model (AccumulationModel): How each event changes the potential.
    threshold (float): Firing threshold.
    order (str): "per_event" applies events one by one in ascending input
        order, "aggregated" applies their weighted sum as one event,
        "simultaneous" evaluates every event at the pre-step potential.
    RETURNS (np.ndarray): Output spikes [n_out] as 0.0 / 1.0.
    """
    if not threshold > 0:
        raise ValueError("Threshold must be positive, got {}".format(threshold))
    model.check_range(state.v)
    active = np.flatnonzero(incoming_spikes)
    v = state.v
    if order == "per_event":
        for j in active:
            v = model.advance(v, weights[j] * incoming_spikes[j])
    elif order == "aggregated":
        if len(active):
            drive = incoming_spikes[active] @ weights[active]
            v = model.advance(v, drive)
    elif order == "simultaneous":
        v = _simultaneous(model, v, weights, incoming_spikes, active)
    else:
        raise ValueError("Unknown event order: {}".format(order))
    v = np.asarray(v, dtype=np.float64)
    fired = v >= threshold
    # Reset by subtraction; at most one spike per step, the surplus carries.
    state.v = np.where(fired, v - threshold, v)
    state.spikes_out = fired
    state.spike_counts += fired
    return fired.astype(np.float64)


@dataclass(frozen=True)
class CompiledLayer:
    """A spiking layer with the linear layers feeding it folded into one
    presynaptic-major weight matrix."""

    weights: np.ndarray
    threshold: float


def _segment_matrix(segment: List[Layer], in_shape: Tuple[int, ...]) -> np.ndarray:
    n_in = int(np.prod(in_shape))
    rows = []
    for start in range(0, n_in, BASIS_CHUNK):
        stop = min(start + BASIS_CHUNK, n_in)
        basis = np.zeros((stop - start, n_in))
        basis[np.arange(stop - start), np.arange(start, stop)] = 1.0
        out = basis.reshape((stop - start,) + in_shape)
        for layer in segment:
            out = layer_forward(layer, out)
        rows.append(out.reshape(stop - start, -1))
    return np.ascontiguousarray(np.concatenate(rows))


def compile_network(net: SnnNetwork) -> List[CompiledLayer]:
    """Fold every spiking layer and the pooling/flatten layers in front of it
    into a dense matrix by pushing unit inputs through them. Linear layers
    after the last spiking layer are ignored.

    net (SnnNetwork): The converted network.
    RETURNS (List[CompiledLayer]): One entry per spiking layer.
    """
    compiled = []
    shapes = [net.input_shape] + net.layer_shapes()
    segment: List[Layer] = []
    segment_start = 0
    for i, layer in enumerate(net.layers):
        segment.append(layer)
        if layer.has_weights:
            matrix = _segment_matrix(segment, shapes[segment_start])
            compiled.append(CompiledLayer(matrix, float(layer.threshold)))
            segment = []
            segment_start = i + 1
    if not compiled:
        raise ValueError("Spiking network has no spiking layers")
    return compiled


NetworkLike = Union[SnnNetwork, Sequence[CompiledLayer]]


def _compiled(net: NetworkLike) -> Sequence[CompiledLayer]:
    return compile_network(net) if isinstance(net, SnnNetwork) else net


def run_image(
    net: NetworkLike, image: np.ndarray, cfg: SimConfig, image_index: int = 0
) -> np.ndarray:
    """Simulate one image.

    net (NetworkLike): The converted network, or its compiled layers.
    image (np.ndarray): Pixel intensities in [0, 1].
    cfg (SimConfig): Simulation settings.
    image_index (int): Index of the image, part of the input random key.
    RETURNS (np.ndarray): Cumulative output spike counts [timesteps, n_out];
        the prediction at t is the argmax of row t (ties to the smaller index).
    """
    layers = _compiled(net)
    pixels = np.asarray(image, dtype=np.float64).ravel()
    if pixels.size != layers[0].weights.shape[0]:
        err = "Image of {} values does not match network input of {}"
        raise ValueError(err.format(pixels.size, layers[0].weights.shape[0]))
    pixel_index = np.arange(pixels.size)
    states = [LayerState.zeros(layer.weights.shape[1]) for layer in layers]
    counts = np.zeros((cfg.timesteps, layers[-1].weights.shape[1]), dtype=np.int64)
    for t in range(cfg.timesteps):
        spikes = encode_input(
            pixels, t, cfg.input_mode, cfg.seed, image_index, pixel_index, cfg.max_rate
        )
        for layer, state in zip(layers, states):
            spikes = step_layer(
                state, layer.weights, spikes, cfg.model, layer.threshold, cfg.event_order
            )
        counts[t] = states[-1].spike_counts
    return counts


def stabilized_error(error_rate: np.ndarray, fraction: float = STABLE_FRACTION) -> float:
    """RETURNS (float): Mean error over the final fraction of timesteps
    (at least one timestep)."""
    window = max(1, int(len(error_rate) * fraction))
    return float(np.mean(error_rate[-window:]))


@dataclass
class SimTrace:
    """Error-vs-timestep record of a dataset run."""

    error_rate: np.ndarray
    final_counts: np.ndarray
    labels: np.ndarray

    @property
    def timesteps(self) -> int:
        return len(self.error_rate)

    @property
    def stabilized_error(self) -> float:
        return stabilized_error(self.error_rate)

    @property
    def final_predictions(self) -> np.ndarray:
        return np.argmax(self.final_counts, axis=1)

    def rows(self) -> List[Tuple[int, float]]:
        """RETURNS (List[Tuple[int, float]]): (timestep, error_rate) rows,
        timesteps counted from 1."""
        return [(t + 1, float(e)) for t, e in enumerate(self.error_rate)]


_WORKER: Dict[str, Any] = {}


def _init_worker(layers: Sequence[CompiledLayer], cfg: SimConfig, images: np.ndarray, labels: np.ndarray):
    _WORKER.update(layers=layers, cfg=cfg, images=images, labels=labels)


def _simulate(index: int) -> Tuple[np.ndarray, np.ndarray]:
    counts = run_image(_WORKER["layers"], _WORKER["images"][index], _WORKER["cfg"], index)
    correct = np.argmax(counts, axis=1) == _WORKER["labels"][index]
    return correct, counts[-1]


def run_dataset(
    net: NetworkLike, ds: Dataset, cfg: SimConfig, workers: int = 1, verbose: bool = False
) -> SimTrace:
    """Simulate every image of a dataset and record the error rate at every
    timestep. Images are independent given (seed, image index), so the
    result does not depend on the number of workers.

    net (NetworkLike): The converted network, or its compiled layers.
    ds (Dataset): Images and labels.
    cfg (SimConfig): Simulation settings.
    workers (int): Number of worker processes.
    verbose (bool): Report progress.
    RETURNS (SimTrace): The error trace and final output counts.
    """
    if len(ds) == 0:
        raise ValueError("Cannot simulate an empty dataset")
    layers = list(_compiled(net))
    indices = range(len(ds))
    correct = np.zeros(cfg.timesteps, dtype=np.int64)
    final_counts = np.zeros((len(ds), layers[-1].weights.shape[1]), dtype=np.int64)
    report = max(1, len(ds) // 10)
    if workers <= 1:
        _init_worker(layers, cfg, ds.images, ds.labels)
        results = map(_simulate, indices)
        executor = None
    else:
        executor = ProcessPoolExecutor(
            max_workers=workers,
            initializer=_init_worker,
            initargs=(layers, cfg, ds.images, ds.labels),
        )
        chunksize = max(1, len(ds) // (workers * 4))
        results = executor.map(_simulate, indices, chunksize=chunksize)
    try:
        for i, (hits, counts) in enumerate(results):
            correct += hits
            final_counts[i] = counts
            if verbose and ((i + 1) % report == 0 or i + 1 == len(ds)):
                running = 1.0 - correct[-1] / (i + 1)
                msg.text(
                    "Simulated {}/{} images, error at T={}: {}".format(
                        i + 1, len(ds), cfg.timesteps, format_percent(running)
                    )
                )
    finally:
        if executor is not None:
            executor.shutdown()
        _WORKER.clear()
    error_rate = 1.0 - correct / len(ds)
    return SimTrace(error_rate, final_counts, np.asarray(ds.labels))


@dataclass
class NeutralPointDemo:
    ideal_spike_count: int
    nonlinear_spike_count: int
    ideal_v: np.ndarray
    nonlinear_v: np.ndarray
    v_star: Optional[float]

    def rows(self) -> List[Tuple[int, float, float]]:
        """RETURNS (List[Tuple[int, float, float]]): (timestep, ideal v,
        nonlinear v) rows, timestep 0 being the resting state."""
        return [
            (t, float(a), float(b))
            for t, (a, b) in enumerate(zip(self.ideal_v, self.nonlinear_v))
        ]


def _drive_single_neuron(
    model: AccumulationModel, weights: np.ndarray, threshold: float, timesteps: int, order: str
) -> Tuple[int, np.ndarray]:
    state = LayerState.zeros(1)
    inputs = np.ones(len(weights))
    trajectory = np.zeros(timesteps + 1)
    for t in range(timesteps):
        step_layer(state, weights, inputs, model, threshold, order)
        trajectory[t + 1] = state.v[0]
    return int(state.spike_counts[0]), trajectory


def demo_neutral_point(
    w: float,
    eps: float,
    theta: float,
    lam: float,
    timesteps: int,
    order: str = "simultaneous",
    v_low: float = -1.0,
    v_high: float = 1.0,
) -> NeutralPointDemo:
    """Three-neuron network: IF0 (weight w + eps) and IF1 (weight -w) fire
    every timestep into IF2. Ideal neurons drift upward by eps per step and
    fire regularly; voltage-domain neurons stall at the neutral point and
    stay silent when the threshold lies above it.

    w (float): Magnitude of the negative weight, > 0.
    eps (float): Surplus of the positive weight, >= 0.
    theta (float): Threshold of IF2, > 0.
    lam (float): Channel-length modulation of the voltage-domain model.
    timesteps (int): Number of timesteps.
    order (str): Event order inside a timestep.
    RETURNS (NeutralPointDemo): Spike counts and potential trajectories of
        IF2 under both models, and the analytic neutral point.
    """
    weights = np.array([[w + eps], [-w]])
    ideal_count, ideal_v = _drive_single_neuron(IdealModel(), weights, theta, timesteps, order)
    model = VoltageClmModel(lam, v_low, v_high)
    nonlinear_count, nonlinear_v = _drive_single_neuron(model, weights, theta, timesteps, order)
    v_star = neutral_point(lam, w, eps, v_high=v_high, v_low=v_low)
    return NeutralPointDemo(ideal_count, nonlinear_count, ideal_v, nonlinear_v, v_star)
