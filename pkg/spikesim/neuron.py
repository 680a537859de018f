"""Per-spike membrane accumulation models of integrate-and-fire neurons.

Potentials are in normalized units: the bounded models live in
[v_low, v_high] (by default [-1, 1]); the time-domain model accumulates
oscillator phase and is unbounded. Every model maps (v, w) to the potential
after one spike of weight w, and works elementwise on numpy arrays.
"""
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import DataError, DegenerateBaseError, NotMonotoneError
from .errors import OutOfRangeError, TooFewPointsError
from .tables import read_table, write_table

DEFAULT_LAMBDA = 0.5
RESCALE_FACTORS = (1.2, 1.4, 1.5, 1.6, 1.8, 2.0)
PROBE_WEIGHT = 0.01
PROBE_SPIKES = 100
CURVE_HEADER = ("n_norm", "v_norm")
RANGE_TOLERANCE = 1e-12

ArrayLike = Union[float, np.ndarray]
Curve = List[Tuple[float, float]]


class AccumulationModel(object):
    variant = "base"

    @property
    def bounds(self) -> Optional[Tuple[float, float]]:
        """RETURNS (Optional[Tuple[float, float]]): Clipping range of the
        potential, or None for unbounded models."""
        return None

    def gain(self, v: ArrayLike, w: ArrayLike) -> ArrayLike:
        """Multiplicative gain applied to a spike of weight w at potential v,
        before clipping."""
        raise NotImplementedError

    def advance(self, v: ArrayLike, w: ArrayLike) -> ArrayLike:
        """Potential after one spike of weight w arrives at potential v."""
        new_v = v + w * self.gain(v, w)
        if self.bounds is not None:
            new_v = np.clip(new_v, *self.bounds)
        return new_v

    def increment(self, v: ArrayLike, w: ArrayLike) -> ArrayLike:
        """Change of potential caused by one spike of weight w at v."""
        self.check_range(v)
        return self.advance(v, w) - v

    def check_range(self, v: ArrayLike) -> None:
        if self.bounds is None:
            if not np.all(np.isfinite(v)):
                raise OutOfRangeError("Membrane potential is not finite")
            return
        low, high = self.bounds
        tol = RANGE_TOLERANCE * max(1.0, abs(low), abs(high))
        v = np.asarray(v)
        if v.size and (not np.all(np.isfinite(v)) or v.min() < low - tol or v.max() > high + tol):
            err = "Membrane potential outside [{}, {}] for the {} model: [{}, {}]"
            raise OutOfRangeError(err.format(low, high, self.variant, v.min(), v.max()))

    def to_dict(self) -> Dict[str, Any]:
        return {"variant": self.variant}


@dataclass(frozen=True)
class IdealModel(AccumulationModel):
    variant = "ideal"

    def gain(self, v: ArrayLike, w: ArrayLike) -> ArrayLike:
        return 1.0

    def advance(self, v: ArrayLike, w: ArrayLike) -> ArrayLike:
        return v + w


@dataclass(frozen=True)
class TimeDomainModel(AccumulationModel):
    """Phase of a voltage-controlled oscillator: every spike shifts the phase
    by the same amount, whatever has been accumulated, and the phase is
    never clipped."""

    gain_factor: float = 1.0
    variant = "time_domain"

    def __post_init__(self):
        if not self.gain_factor > 0:
            raise ValueError("Time-domain gain must be positive, got {}".format(self.gain_factor))

    def gain(self, v: ArrayLike, w: ArrayLike) -> ArrayLike:
        return self.gain_factor

    def advance(self, v: ArrayLike, w: ArrayLike) -> ArrayLike:
        return v + self.gain_factor * w

    def to_dict(self) -> Dict[str, Any]:
        return {"variant": self.variant, "gain": self.gain_factor}


@dataclass(frozen=True)
class VoltageClmModel(AccumulationModel):
    """Capacitor charged and discharged by current sources whose current
    depends on their drain-source voltage, I ~ (1 + lam * V_DS). The charging
    source sees V_DS = v_high - v, the discharging one v - v_low. Both
    currents are normalized to unit gain at v = 0.
    """

    lam: float = DEFAULT_LAMBDA
    v_low: float = -1.0
    v_high: float = 1.0
    variant = "voltage_clm"

    def __post_init__(self):
        if not self.lam >= 0:
            raise ValueError("Channel-length modulation must be >= 0, got {}".format(self.lam))
        if not self.v_low < 0 < self.v_high:
            err = "Voltage range must satisfy v_low < 0 < v_high, got [{}, {}]"
            raise ValueError(err.format(self.v_low, self.v_high))

    @property
    def bounds(self) -> Optional[Tuple[float, float]]:
        return (self.v_low, self.v_high)

    def f_plus(self, v: ArrayLike) -> ArrayLike:
        """Gain of the charging path, 1 at rest and falling as v rises."""
        lam = self.lam
        return np.maximum((1.0 + lam * (self.v_high - v)) / (1.0 + lam * self.v_high), 0.0)

    def f_minus(self, v: ArrayLike) -> ArrayLike:
        """Gain of the discharging path, 1 at rest and falling as v falls."""
        lam = self.lam
        return np.maximum((1.0 + lam * (v - self.v_low)) / (1.0 - lam * self.v_low), 0.0)

    def gain(self, v: ArrayLike, w: ArrayLike) -> ArrayLike:
        return np.where(np.asarray(w) >= 0, self.f_plus(v), self.f_minus(v))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "variant": self.variant,
            "lambda": self.lam,
            "v_low": self.v_low,
            "v_high": self.v_high,
        }


@dataclass(frozen=True)
class GainFunction(object):
    """Piecewise-linear per-spike gain over the potential, clamped to the
    end gains outside the sampled range."""

    knots_v: Tuple[float, ...]
    knots_g: Tuple[float, ...]

    def __call__(self, v: ArrayLike) -> ArrayLike:
        return np.interp(v, self.knots_v, self.knots_g)


def _check_curve(curve: Sequence[Tuple[float, float]]) -> Tuple[np.ndarray, np.ndarray]:
    if len(curve) < 3:
        raise TooFewPointsError("A transfer curve needs at least 3 points, got {}".format(len(curve)))
    arr = np.asarray(curve, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise DataError("A transfer curve is a list of (n, v) pairs")
    for name, col in (("n", arr[:, 0]), ("v", arr[:, 1])):
        diffs = np.diff(col)
        if not (np.all(diffs > 0) or np.all(diffs < 0)):
            raise NotMonotoneError("Transfer curve is not strictly monotone in {}".format(name))
    return arr[:, 0], arr[:, 1]


def derive_gain_from_curve(curve: Sequence[Tuple[float, float]]) -> GainFunction:
    """Turn a measured potential-vs-spikes curve into a per-spike gain g(v):
    forward differences dv/dn are placed at the midpoint potentials,
    interpolated linearly and normalized so that g(0) = 1.

    curve (Sequence[Tuple[float, float]]): (n, v) samples, strictly
        monotone in both coordinates.
    RETURNS (GainFunction): The normalized gain function.
    """
    n, v = _check_curve(curve)
    slopes = np.diff(v) / np.diff(n)
    midpoints = (v[:-1] + v[1:]) / 2.0
    order = np.argsort(midpoints)
    midpoints, slopes = midpoints[order], slopes[order]
    at_rest = float(np.interp(0.0, midpoints, slopes))
    gains = slopes / at_rest
    return GainFunction(tuple(midpoints.tolist()), tuple(gains.tolist()))


@dataclass(frozen=True)
class TableModel(AccumulationModel):
    """Accumulation following an imported transfer curve."""

    gain_fn: GainFunction
    variant = "table"

    @classmethod
    def from_curve(cls, curve: Sequence[Tuple[float, float]]) -> "TableModel":
        return cls(derive_gain_from_curve(curve))

    @property
    def bounds(self) -> Optional[Tuple[float, float]]:
        return (-1.0, 1.0)

    def gain(self, v: ArrayLike, w: ArrayLike) -> ArrayLike:
        return self.gain_fn(v)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "variant": self.variant,
            "knots_v": list(self.gain_fn.knots_v),
            "knots_g": list(self.gain_fn.knots_g),
        }


@dataclass(frozen=True)
class RescaledModel(AccumulationModel):
    """A base model stretched by a constant c: increments are c times the
    base increment at v / c and the clipping range grows by c."""

    base: AccumulationModel
    c: float
    variant = "rescaled"

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError("Rescale factor must be positive, got {}".format(self.c))

    @property
    def bounds(self) -> Optional[Tuple[float, float]]:
        if self.base.bounds is None:
            return None
        low, high = self.base.bounds
        return (self.c * low, self.c * high)

    def gain(self, v: ArrayLike, w: ArrayLike) -> ArrayLike:
        return self.c * self.base.gain(np.divide(v, self.c), w)

    def advance(self, v: ArrayLike, w: ArrayLike) -> ArrayLike:
        u = np.divide(v, self.c)
        new_v = v + self.c * (self.base.advance(u, w) - u)
        if self.bounds is not None:
            new_v = np.clip(new_v, *self.bounds)
        return new_v

    def to_dict(self) -> Dict[str, Any]:
        return {"variant": self.variant, "c": self.c, "base": self.base.to_dict()}


def increment(m: AccumulationModel, v: ArrayLike, w: ArrayLike) -> ArrayLike:
    """Membrane increment of one spike of weight w at potential v.

    m (AccumulationModel): The accumulation model.
    v (ArrayLike): Current potential, inside the model's range.
    w (ArrayLike): Synaptic weight of the spike.
    RETURNS (ArrayLike): The change of potential.
    """
    delta = m.increment(v, w)
    if np.ndim(delta) == 0:
        return float(delta)
    return delta


def neutral_point(
    lam: float, w: float, eps: float, v_high: float = 1.0, v_low: float = -1.0
) -> Optional[float]:
    """Potential at which a +(w + eps) spike and a -w spike change the
    voltage-domain potential by the same amount, so that accumulation stops.

    lam (float): Channel-length modulation strength.
    w (float): Magnitude of the negative weight.
    eps (float): Surplus of the positive weight.
    v_high (float): Upper end of the potential range.
    v_low (float): Lower end of the potential range.
    RETURNS (Optional[float]): The neutral point, or None if the model is
        linear or the point lies above v_high.
    """
    if not (w > 0 and eps >= 0 and lam >= 0):
        err = "neutral_point needs w > 0, eps >= 0 and lam >= 0, got w={}, eps={}, lam={}"
        raise ValueError(err.format(w, eps, lam))
    if lam == 0:
        return None
    up = (w + eps) / (1.0 + lam * v_high)
    down = w / (1.0 - lam * v_low)
    v_star = eps / (lam * (up + down))
    if v_star > v_high:
        return None
    return v_star


def potential_curve(m: AccumulationModel, w_per_spike: float, n_spikes: int) -> Curve:
    """Potential after each of n_spikes identical spikes, starting at rest,
    with thresholding disabled.

    m (AccumulationModel): The accumulation model.
    w_per_spike (float): Weight of every spike.
    n_spikes (int): Number of spikes.
    RETURNS (Curve): The (n, v) trajectory, n_spikes + 1 points.
    """
    if n_spikes < 1:
        raise ValueError("n_spikes must be >= 1, got {}".format(n_spikes))
    v = 0.0
    curve = [(0, v)]
    for n in range(1, n_spikes + 1):
        m.check_range(v)
        v = float(m.advance(v, w_per_spike))
        curve.append((n, v))
    return curve


def fit_factor(
    base: AccumulationModel,
    reference: Optional[AccumulationModel] = None,
    w_per_spike: float = PROBE_WEIGHT,
    n_spikes: int = PROBE_SPIKES,
) -> float:
    """Factor stretching the base curve to the maximum range of the
    reference (ideal) curve at the probe setting.

    RETURNS (float): max|v_reference| / max|v_base|.
    """
    reference = reference if reference is not None else IdealModel()
    ref_max = max(abs(v) for _, v in potential_curve(reference, w_per_spike, n_spikes))
    base_max = max(abs(v) for _, v in potential_curve(base, w_per_spike, n_spikes))
    if base_max == 0:
        raise DegenerateBaseError("Base curve never leaves 0, cannot fit a rescale factor")
    return ref_max / base_max


def rescale(
    base: AccumulationModel,
    mode: Union[float, str] = "fit",
    reference: Optional[AccumulationModel] = None,
    w_per_spike: float = PROBE_WEIGHT,
    n_spikes: int = PROBE_SPIKES,
) -> RescaledModel:
    """Stretch a model by a constant factor, or by the factor that fits its
    curve to the maximum of the ideal curve.

    base (AccumulationModel): The model to rescale.
    mode (Union[float, str]): A constant factor c > 0, or "fit".
    reference (Optional[AccumulationModel]): Curve to fit to (ideal by default).
    w_per_spike (float): Probe weight for "fit".
    n_spikes (int): Probe length for "fit".
    RETURNS (RescaledModel): The rescaled model.
    """
    if mode == "fit":
        return RescaledModel(base, fit_factor(base, reference, w_per_spike, n_spikes))
    if isinstance(mode, str):
        raise ValueError("Unknown rescale mode: {}".format(mode))
    return RescaledModel(base, float(mode))


def gain_profile(m: AccumulationModel, v_grid: np.ndarray, sign: float = 1.0) -> np.ndarray:
    """Per-spike gain of a model over a grid of potentials, for positive
    (sign > 0) or negative spikes.

    RETURNS (np.ndarray): The gain at every grid point.
    """
    v_grid = np.asarray(v_grid, dtype=np.float64)
    return np.broadcast_to(m.gain(v_grid, np.full_like(v_grid, sign)), v_grid.shape).copy()


MODEL_NAMES = ("ideal", "voltage", "time", "table")


def make_model(
    name: str,
    lam: float = DEFAULT_LAMBDA,
    v_low: float = -1.0,
    v_high: float = 1.0,
    gain: float = 1.0,
    curve: Optional[Curve] = None,
) -> AccumulationModel:
    """Build a model from its command-line name.

    name (str): One of "ideal", "voltage", "time" or "table".
    RETURNS (AccumulationModel): The model.
    """
    if name == "ideal":
        return IdealModel()
    if name in ("voltage", "voltage_clm"):
        return VoltageClmModel(lam, v_low, v_high)
    if name in ("time", "time_domain"):
        return TimeDomainModel(gain)
    if name == "table":
        if curve is None:
            raise ValueError("The table model needs a transfer curve")
        return TableModel.from_curve(curve)
    raise ValueError("Unknown neuron model: {}".format(name))


def read_curve_csv(path: Union[str, Path]) -> Curve:
    """Read a transfer curve with header n_norm,v_norm. Lines starting with
    '#' are comments.

    path (Union[str, Path]): The CSV file.
    RETURNS (Curve): The (n, v) samples.
    """
    header, rows = read_table(path)
    if tuple(header) != CURVE_HEADER:
        err = "Transfer curve {} must have header {}, found {}"
        raise DataError(err.format(path, ",".join(CURVE_HEADER), ",".join(header)))
    try:
        curve = [(float(n), float(v)) for n, v in rows]
    except ValueError as e:
        raise DataError("Transfer curve {} holds a non-numeric value: {}".format(path, e))
    for n, v in curve:
        if not (-1.0 <= n <= 1.0 and -1.0 <= v <= 1.0):
            err = "Transfer curve {} must be normalized to [-1, 1], found ({}, {})"
            raise DataError(err.format(path, n, v))
    return curve


def write_curve_csv(path: Union[str, Path], curve: Curve) -> None:
    """Write a transfer curve in the format read_curve_csv expects."""
    write_table(path, [(repr(float(n)), repr(float(v))) for n, v in curve], CURVE_HEADER)
