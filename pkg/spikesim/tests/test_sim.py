import numpy as np
import pytest

from spikesim import sim
from spikesim.ann import init_model, layer_forward
from spikesim.convert import ActivationStats, SnnLayer, SnnNetwork
from spikesim.convert import collect_max_activations, normalize_and_convert
from spikesim.mnist import Dataset
from spikesim.neuron import IdealModel, TimeDomainModel, VoltageClmModel, neutral_point
from spikesim.sim import LayerState, SimConfig, SimTrace, compile_network
from spikesim.sim import demo_neutral_point, encode_input, run_dataset, run_image
from spikesim.sim import stabilized_error, step_layer

TINY_CNN = [
    {"kind": "conv2d", "out_channels": 2, "kernel": 3},
    {"kind": "relu"},
    {"kind": "avgpool2d", "size": 2},
    {"kind": "flatten"},
    {"kind": "dense", "units": 10},
]


def identity_net(n, threshold=1.0):
    layer = SnnLayer("dense", np.eye(n), threshold=threshold)
    return SnnNetwork([layer], (n,), ActivationStats([1.0, 1.0]))


@pytest.fixture(scope="module")
def tiny():
    rng = np.random.default_rng(0)
    images = rng.uniform(size=(12, 6, 6))
    ds = Dataset(images, rng.integers(0, 10, size=12))
    model = init_model(TINY_CNN, (1, 6, 6), seed=0)
    return normalize_and_convert(model, collect_max_activations(model, images)), ds


def test_encode_input_zero():
    for t in range(50):
        assert encode_input(0.0, t, "poisson", seed=1) == 0.0
        assert encode_input(0.0, t, "constant_current") == 0.0


def test_encode_input_full():
    for t in range(50):
        assert encode_input(1.0, t, "constant_current") == 1.0
        assert encode_input(1.0, t, "poisson", seed=t) == 1.0


def test_encode_input_rate():
    pixels = np.full(10 ** 5, 0.5)
    spikes = encode_input(pixels, 3, "poisson", seed=9, image_index=2)
    assert set(np.unique(spikes).tolist()) <= {0.0, 1.0}
    assert abs(spikes.mean() - 0.5) <= 0.005
    half = encode_input(pixels, 3, "poisson", seed=9, image_index=2, max_rate=0.5)
    assert abs(half.mean() - 0.25) <= 0.005


def test_encode_input_deterministic():
    pixels = np.linspace(0, 1, 784)
    first = encode_input(pixels, 11, "poisson", seed=4, image_index=8)
    second = encode_input(pixels, 11, "poisson", seed=4, image_index=8)
    other = encode_input(pixels, 11, "poisson", seed=4, image_index=9)
    assert np.array_equal(first, second)
    assert not np.array_equal(first, other)


def test_step_layer_spike():
    state = LayerState(np.array([0.9]), np.zeros(1, dtype=bool), np.zeros(1, dtype=np.int64))
    out = step_layer(state, np.array([[0.3]]), np.array([1.0]), IdealModel(), 1.0)
    assert out.tolist() == [1.0]
    assert state.v[0] == pytest.approx(0.2)
    assert state.spike_counts.tolist() == [1]


def test_step_layer_no_spike():
    state = LayerState(np.array([0.5]), np.zeros(1, dtype=bool), np.zeros(1, dtype=np.int64))
    out = step_layer(state, np.array([[0.3]]), np.array([1.0]), IdealModel(), 1.0)
    assert out.tolist() == [0.0]
    assert state.v[0] == pytest.approx(0.8)


def test_step_layer_event_order():
    model = VoltageClmModel(0.5)
    up_first = LayerState.zeros(1)
    step_layer(up_first, np.array([[0.6], [-0.6]]), np.ones(2), model, 1.0)
    down_first = LayerState.zeros(1)
    step_layer(down_first, np.array([[-0.6], [0.6]]), np.ones(2), model, 1.0)
    # f_minus(0.6) = f_plus(-0.6) = 1.8 / 1.5
    assert up_first.v[0] == pytest.approx(0.6 - 0.6 * 1.2, abs=1e-12)
    assert down_first.v[0] == pytest.approx(-0.6 + 0.6 * 1.2, abs=1e-12)
    assert up_first.v[0] != down_first.v[0]


def test_step_layer_orders_agree_for_ideal():
    rng = np.random.default_rng(1)
    weights = rng.normal(0, 0.2, size=(20, 5))
    spikes = (rng.uniform(size=20) < 0.5).astype(np.float64)
    results = []
    for order in ("per_event", "aggregated", "simultaneous"):
        state = LayerState.zeros(5)
        step_layer(state, weights, spikes, IdealModel(), 10.0, order)
        results.append(state.v)
    assert np.allclose(results[0], results[1], atol=1e-12)
    assert np.allclose(results[0], results[2], atol=1e-12)


def test_step_layer_bad_order():
    with pytest.raises(ValueError):
        step_layer(LayerState.zeros(1), np.ones((1, 1)), np.ones(1), IdealModel(), 1.0, "random")


def test_reset_by_subtraction_conserves_charge():
    rng = np.random.default_rng(2)
    # dyadic weights keep every sum exact
    weights = rng.integers(-8, 16, size=(30, 8)) / 64.0
    state = LayerState.zeros(8)
    threshold = 0.75
    total = np.zeros(8)
    for _ in range(500):
        spikes = (rng.uniform(size=30) < 0.3).astype(np.float64)
        total += spikes @ weights
        step_layer(state, weights, spikes, IdealModel(), threshold)
    assert np.allclose(state.v + threshold * state.spike_counts, total, rtol=0, atol=1e-12)


def test_compile_network_matches_layers(tiny):
    net, ds = tiny
    compiled = compile_network(net)
    assert len(compiled) == 2
    x = ds.images[:3].reshape(3, 1, 6, 6)
    direct = layer_forward(net.layers[0], x).reshape(3, -1)
    assert np.allclose(x.reshape(3, -1) @ compiled[0].weights, direct)
    hidden = np.random.default_rng(3).uniform(size=(3, 2, 4, 4))
    out = hidden
    for layer in net.layers[1:]:
        out = layer_forward(layer, out)
    assert np.allclose(hidden.reshape(3, -1) @ compiled[1].weights, out)
    assert [c.threshold for c in compiled] == [1.0, 1.0]


def test_run_image_zero_image(tiny):
    net, _ = tiny
    counts = run_image(net, np.zeros((6, 6)), SimConfig(timesteps=20))
    assert counts.shape == (20, 10)
    assert counts.max() == 0
    assert np.argmax(counts[-1]) == 0


def test_run_image_identity_constant_current():
    cfg = SimConfig(timesteps=100, input_mode="constant_current")
    counts = run_image(identity_net(1), np.array([1.0]), cfg)
    assert counts[:, 0].tolist() == list(range(1, 101))


def test_run_image_voltage_fires_less():
    image = np.array([0.5])
    ideal = run_image(identity_net(1), image, SimConfig(timesteps=100, input_mode="constant_current"))
    cfg = SimConfig(timesteps=100, input_mode="constant_current", model=VoltageClmModel(0.5))
    voltage = run_image(identity_net(1), image, cfg)
    assert ideal[-1, 0] == 50
    assert voltage[-1, 0] < ideal[-1, 0]
    flat = SimConfig(timesteps=100, input_mode="constant_current", model=VoltageClmModel(0.0))
    assert np.array_equal(run_image(identity_net(1), image, flat), ideal)


def test_run_image_voltage_full_drive_fires_every_step():
    # a unit increment from rest reaches v_high == threshold in one step
    image = np.array([1.0])
    cfg = SimConfig(timesteps=100, input_mode="constant_current", model=VoltageClmModel(0.5))
    voltage = run_image(identity_net(1), image, cfg)
    assert voltage[:, 0].tolist() == list(range(1, 101))


def test_run_dataset_releases_worker_state(tiny):
    net, ds = tiny
    run_dataset(net, ds, SimConfig(timesteps=3), workers=1)
    assert sim._WORKER == {}


def test_run_image_shape_mismatch():
    with pytest.raises(ValueError):
        run_image(identity_net(2), np.zeros(3), SimConfig(timesteps=1))


def test_run_dataset_perfect():
    image = np.zeros(10)
    image[3] = 1.0
    ds = Dataset(image[np.newaxis], np.array([3]))
    trace = run_dataset(identity_net(10), ds, SimConfig(timesteps=30, input_mode="constant_current"))
    assert trace.error_rate.tolist() == [0.0] * 30
    assert trace.final_predictions.tolist() == [3]
    assert trace.rows()[0] == (1, 0.0)
    assert trace.stabilized_error == 0.0


def test_run_dataset_ideal_equals_time_domain(tiny):
    net, ds = tiny
    ideal = run_dataset(net, ds, SimConfig(timesteps=40, seed=5))
    time = run_dataset(net, ds, SimConfig(timesteps=40, seed=5, model=TimeDomainModel(1.0)))
    assert np.array_equal(ideal.error_rate, time.error_rate)
    assert np.array_equal(ideal.final_counts, time.final_counts)


@pytest.mark.parametrize("workers", [2, 4])
def test_run_dataset_workers(tiny, workers):
    net, ds = tiny
    cfg = SimConfig(timesteps=25, seed=1, model=VoltageClmModel(0.5))
    single = run_dataset(net, ds, cfg, workers=1)
    parallel = run_dataset(net, ds, cfg, workers=workers)
    assert np.array_equal(single.error_rate, parallel.error_rate)
    assert np.array_equal(single.final_counts, parallel.final_counts)


def test_run_dataset_empty(tiny):
    net, _ = tiny
    empty = Dataset(np.zeros((0, 6, 6)), np.zeros(0, dtype=np.int64))
    with pytest.raises(ValueError):
        run_dataset(net, empty, SimConfig(timesteps=5))


def test_stabilized_error():
    assert stabilized_error(np.array([1.0, 0.5, 0.2])) == 0.2
    rates = np.concatenate([np.ones(270), np.full(30, 0.1)])
    assert stabilized_error(rates) == pytest.approx(0.1)
    trace = SimTrace(rates, np.zeros((1, 10)), np.zeros(1))
    assert trace.timesteps == 300
    assert trace.stabilized_error == pytest.approx(0.1)


@pytest.mark.parametrize(
    "kwargs",
    [{"timesteps": 0}, {"input_mode": "burst"}, {"max_rate": 0.0}, {"event_order": "random"}],
)
def test_sim_config_validation(kwargs):
    with pytest.raises(ValueError):
        SimConfig(**kwargs)


def test_demo_ideal_spike_count():
    demo = demo_neutral_point(0.1, 0.01, 0.05, 0.5, 1000)
    assert abs(demo.ideal_spike_count - 200) <= 1
    assert len(demo.rows()) == 1001
    assert demo.rows()[0] == (0, 0.0, 0.0)


def test_demo_silent_above_neutral_point():
    demo = demo_neutral_point(0.1, 0.01, 0.2, 0.5, 10 ** 5)
    assert demo.nonlinear_spike_count == 0
    assert demo.v_star == pytest.approx(0.015 / 0.105)
    assert abs(demo.nonlinear_v[-1] - demo.v_star) <= 1e-6


def test_demo_alive_below_neutral_point():
    demo = demo_neutral_point(0.1, 0.01, 0.05, 0.5, 1000)
    assert demo.nonlinear_spike_count > 0
    assert demo.nonlinear_spike_count < demo.ideal_spike_count


def test_demo_converges_to_neutral_point():
    lam, w, eps = 0.5, 0.1, 0.01
    demo = demo_neutral_point(w, eps, 1.0, lam, 2000)
    assert abs(demo.nonlinear_v[-1] - neutral_point(lam, w, eps)) <= 1e-6
    ideal_drift = np.diff(demo.ideal_v[:50])
    assert np.allclose(ideal_drift, eps, atol=1e-12)
