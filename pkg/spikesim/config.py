"""Flat key = value run configuration.

Example file:

    # experiment.cfg
    data_dir = /data/mnist
    neuron = voltage
    lambda = 0.5
    timesteps = 300
    factors = 1.2, 1.4, 1.5, 1.6, 1.8, 2.0
"""
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Dict, List, Union

from .convert import NORM_METHODS
from .errors import ConfigError
from .neuron import DEFAULT_LAMBDA, MODEL_NAMES, PROBE_SPIKES, PROBE_WEIGHT
from .neuron import RESCALE_FACTORS
from .sim import EVENT_ORDERS, INPUT_MODES
from .util import ensure_path

CURVE_MODELS = MODEL_NAMES + ("rescaled",)
# Keys that are not valid Python identifiers in the config file.
ALIASES = {"lambda": "lam"}
TRUE_VALUES = ("1", "true", "yes", "on")
FALSE_VALUES = ("0", "false", "no", "off")


@dataclass(frozen=True)
class RunConfig:
    # paths
    data_dir: str = ""
    model_path: str = "ann.json"
    snn_path: str = "snn.json"
    output: str = ""
    curve: str = ""
    # training
    arch: str = "lenet5"
    epochs: int = 3
    batch_size: int = 32
    lr: float = 0.05
    seed: int = 0
    subset: int = 0
    # conversion
    norm: str = "data"
    norm_subset: int = 10000
    # simulation
    test_subset: int = 1000
    timesteps: int = 300
    input_mode: str = "poisson"
    max_rate: float = 1.0
    event_order: str = "per_event"
    workers: int = 1
    # neuron model
    neuron: str = "ideal"
    lam: float = DEFAULT_LAMBDA
    v_low: float = -1.0
    v_high: float = 1.0
    gain: float = 1.0
    # rescale sweep and transfer curves
    factors: List[float] = field(default_factory=lambda: list(RESCALE_FACTORS))
    models: List[str] = field(default_factory=lambda: ["ideal", "voltage", "time"])
    probe_w: float = PROBE_WEIGHT
    probe_n: int = PROBE_SPIKES
    # neutral-point demonstration
    w: float = 0.1
    eps: float = 0.01
    theta: float = 0.05
    steps: int = 1000
    demo_order: str = "simultaneous"
    verbose: bool = True

    def to_dict(self) -> Dict[str, Any]:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def update(self, overrides: Dict[str, Any]) -> "RunConfig":
        """Return a copy with the given values replaced. None values are
        skipped, so unset command-line flags keep the file values.

        overrides (Dict[str, Any]): Field names (or aliases) mapped to values.
        RETURNS (RunConfig): The updated config.
        """
        known = {f.name: f for f in fields(self)}
        changes = {}
        for key, value in overrides.items():
            name = ALIASES.get(key, key)
            if name not in known:
                raise ConfigError("Unknown config key: {}".format(key))
            if value is None:
                continue
            changes[name] = coerce(name, known[name].type, value)
        return replace(self, **changes)

    def validate(self) -> "RunConfig":
        """Check value ranges and choices.

        RETURNS (RunConfig): The config itself.
        """
        choices = [
            ("neuron", MODEL_NAMES),
            ("norm", NORM_METHODS),
            ("input_mode", INPUT_MODES),
            ("event_order", EVENT_ORDERS),
            ("demo_order", EVENT_ORDERS),
        ]
        for name, allowed in choices:
            if getattr(self, name) not in allowed:
                err = "Invalid value for {}: {} (choose from {})"
                raise ConfigError(err.format(name, getattr(self, name), ", ".join(allowed)))
        for model in self.models:
            if model not in CURVE_MODELS:
                err = "Invalid curve model: {} (choose from {})"
                raise ConfigError(err.format(model, ", ".join(CURVE_MODELS)))
        positive = ["epochs", "batch_size", "timesteps", "workers", "probe_n", "steps", "norm_subset"]
        for name in positive:
            if getattr(self, name) < 1:
                raise ConfigError("{} must be >= 1, got {}".format(name, getattr(self, name)))
        for name in ("subset", "test_subset"):
            if getattr(self, name) < 0:
                raise ConfigError("{} must be >= 0, got {}".format(name, getattr(self, name)))
        if not 0 < self.max_rate <= 1:
            raise ConfigError("max_rate must lie in (0, 1], got {}".format(self.max_rate))
        if self.lr < 0 or self.lam < 0:
            raise ConfigError("lr and lambda must be non-negative")
        if self.gain <= 0 or self.theta <= 0 or self.w <= 0 or self.eps < 0:
            raise ConfigError("gain, theta and w must be positive and eps non-negative")
        if not self.v_low < 0 < self.v_high:
            raise ConfigError("Voltage range must satisfy v_low < 0 < v_high")
        if any(c <= 0 for c in self.factors):
            raise ConfigError("Rescale factors must be positive: {}".format(self.factors))
        if self.neuron == "table" and not self.curve:
            raise ConfigError("The table neuron needs --curve")
        return self


def coerce(name: str, annotation: Any, value: Any) -> Any:
    """Convert a raw (usually string) value to the type of a config field.

    name (str): The field name, used in error messages.
    annotation (Any): The field type.
    value (Any): The raw value.
    RETURNS (Any): The converted value.
    """
    try:
        if annotation is bool:
            if isinstance(value, bool):
                return value
            text = str(value).strip().lower()
            if text in TRUE_VALUES:
                return True
            if text in FALSE_VALUES:
                return False
            raise ValueError(value)
        if annotation is int:
            if isinstance(value, float) and not value.is_integer():
                raise ValueError(value)
            return int(str(value).strip()) if isinstance(value, str) else int(value)
        if annotation is float:
            return float(value)
        if annotation is str:
            return str(value).strip()
        if annotation == List[float]:
            return [float(v) for v in _split_list(value)]
        if annotation == List[str]:
            return [str(v).strip() for v in _split_list(value)]
    except ValueError:
        raise ConfigError("Invalid value for {}: {!r}".format(name, value))
    raise ConfigError("Unsupported config field type for {}".format(name))


def _split_list(value: Any) -> List[Any]:
    if isinstance(value, (list, tuple)):
        return list(value)
    return [v for v in str(value).split(",") if v.strip()]


def parse_config(text: str, source: str = "<string>") -> Dict[str, str]:
    """Parse key = value lines. Blank lines and '#' comments are ignored.

    text (str): The config text.
    source (str): Name of the source, used in error messages.
    RETURNS (Dict[str, str]): Raw values by key.
    """
    values = {}
    for i, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("{}:{}: expected key = value, got {!r}".format(source, i, line))
        key, value = (part.strip() for part in line.split("=", 1))
        if key in values:
            raise ConfigError("{}:{}: duplicate key {}".format(source, i, key))
        values[key] = value
    return values


def load_config(path: Union[str, Path, None] = None) -> RunConfig:
    """Load a config file on top of the defaults. Unknown keys are rejected.

    path (Union[str, Path, None]): The config file, or None for defaults.
    RETURNS (RunConfig): The config.
    """
    config = RunConfig()
    if path is None:
        return config
    path = ensure_path(path)
    values = parse_config(path.read_text(encoding="utf8"), source=str(path))
    return config.update(values)
