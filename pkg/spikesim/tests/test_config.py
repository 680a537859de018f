import pytest

from spikesim.config import RunConfig, coerce, load_config, parse_config
from spikesim.errors import ConfigError
from spikesim.neuron import RESCALE_FACTORS


def test_defaults():
    cfg = RunConfig().validate()
    assert cfg.neuron == "ideal"
    assert cfg.lam == 0.5
    assert cfg.timesteps == 300
    assert cfg.factors == list(RESCALE_FACTORS)
    assert cfg.demo_order == "simultaneous"


def test_parse_config():
    text = """
    # experiment
    neuron = voltage
    lambda = 0.25   # stronger nonlinearity
    factors = 1.2, 2.0
    """
    values = parse_config(text)
    assert values == {"neuron": "voltage", "lambda": "0.25", "factors": "1.2, 2.0"}


@pytest.mark.parametrize("text", ["neuron voltage", "seed = 1\nseed = 2"])
def test_parse_config_invalid(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_load_config(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("neuron = voltage\nlambda = 0.25\nworkers = 4\nverbose = no\nmodels = ideal, rescaled\n")
    cfg = load_config(path).validate()
    assert cfg.neuron == "voltage"
    assert cfg.lam == 0.25
    assert cfg.workers == 4
    assert cfg.verbose is False
    assert cfg.models == ["ideal", "rescaled"]


def test_load_config_unknown_key(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("neurons = voltage\n")
    with pytest.raises(ConfigError):
        load_config(path)


def test_update_skips_none():
    cfg = RunConfig().update({"timesteps": "50"}).update({"timesteps": None, "lam": 0.1})
    assert cfg.timesteps == 50
    assert cfg.lam == 0.1


@pytest.mark.parametrize(
    "name,annotation,value,expected",
    [
        ("seed", int, "7", 7),
        ("lr", float, "0.5", 0.5),
        ("verbose", bool, "on", True),
        ("factors", RunConfig.__dataclass_fields__["factors"].type, "1.5,2", [1.5, 2.0]),
    ],
)
def test_coerce(name, annotation, value, expected):
    assert coerce(name, annotation, value) == expected


@pytest.mark.parametrize("name,annotation,value", [("seed", int, "seven"), ("seed", int, 1.5), ("verbose", bool, "maybe")])
def test_coerce_invalid(name, annotation, value):
    with pytest.raises(ConfigError):
        coerce(name, annotation, value)


@pytest.mark.parametrize(
    "overrides",
    [
        {"neuron": "spiking"},
        {"norm": "robust"},
        {"event_order": "random"},
        {"models": "ideal,other"},
        {"timesteps": 0},
        {"test_subset": -1},
        {"max_rate": 1.5},
        {"lam": -0.1},
        {"v_low": 0.5},
        {"factors": "1.2,0"},
        {"neuron": "table"},
        {"theta": 0},
    ],
)
def test_validate(overrides):
    with pytest.raises(ConfigError):
        RunConfig().update(overrides).validate()
