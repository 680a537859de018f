import numpy as np
import pytest

from spikesim.ann import AnnModel, Layer, forward, lenet5, predict, save_model
from spikesim.convert import ActivationStats, SnnLayer, SnnNetwork, collect_max_activations
from spikesim.convert import collect_max_weights, collect_stats, load_snn, normalize_and_convert
from spikesim.convert import normalize_model, save_snn
from spikesim.errors import MissingStatsError, SchemaError
from spikesim.mnist import Dataset


@pytest.fixture
def images():
    return np.random.default_rng(0).uniform(size=(20, 28, 28))


def test_collect_max_activations():
    model = AnnModel([Layer("dense", np.array([[2.0]]))], (1,))
    stats = collect_max_activations(model, np.array([[1.0], [3.0]]))
    assert stats.lambdas == [3.0, 6.0]
    assert stats.method == "data"


def test_collect_max_activations_floor():
    model = AnnModel([Layer("dense", np.zeros((2, 1))), Layer("relu")], (1,))
    stats = collect_max_activations(model, np.array([[1.0], [3.0]]))
    assert stats.lambdas == [3.0, 1e-9]


def test_collect_max_activations_after_relu():
    weights = np.array([[1.0], [-5.0]])
    model = AnnModel([Layer("dense", weights), Layer("relu"), Layer("dense", np.ones((1, 2)))], (1,))
    stats = collect_max_activations(model, np.array([[0.5], [1.0]]))
    assert stats.lambdas == [1.0, 1.0, 1.0]


def test_collect_max_activations_batches(images):
    model = lenet5(seed=1)
    whole = collect_max_activations(model, images)
    batched = collect_max_activations(model, images, batch_size=3)
    # summation order in BLAS depends on the batch shape
    assert batched.lambdas == pytest.approx(whole.lambdas, rel=1e-12)


def test_collect_max_weights():
    weights = np.array([[1.0, -2.0], [3.0, 1.0]])
    model = AnnModel([Layer("dense", weights), Layer("relu"), Layer("dense", np.array([[0.5, 0.5]]))], (2,))
    stats = collect_max_weights(model)
    assert stats.method == "model"
    assert stats.lambdas == [1.0, 4.0, 4.0]


def test_collect_stats_methods(images):
    model = lenet5(seed=2)
    ds = Dataset(images, np.zeros(len(images), dtype=np.int64))
    data = collect_stats(model, ds, "data")
    worst = collect_stats(model, ds, "model")
    assert len(data.lambdas) == len(worst.lambdas) == 6
    assert all(w >= d for d, w in zip(data.lambdas, worst.lambdas))
    with pytest.raises(ValueError):
        collect_stats(model, ds, "robust")


def test_normalize_scales_weights():
    model = AnnModel([Layer("dense", np.array([[2.0, -4.0]]))], (2,))
    normalized = normalize_model(model, ActivationStats([2.0, 4.0]))
    assert normalized.layers[0].weights.tolist() == [[1.0, -2.0]]
    assert model.layers[0].weights.tolist() == [[2.0, -4.0]]


def test_normalize_equal_lambdas():
    model = lenet5(seed=3)
    normalized = normalize_model(model, ActivationStats([1.5] * 6))
    for a, b in zip(model.layers, normalized.layers):
        if a.has_weights:
            assert np.array_equal(a.weights, b.weights)


def test_normalize_missing_stats():
    model = lenet5(seed=0)
    with pytest.raises(MissingStatsError):
        normalize_model(model, ActivationStats([1.0, 1.0]))


def test_normalize_preserves_argmax(images):
    model = lenet5(seed=4)
    stats = collect_max_activations(model, images)
    normalized = normalize_model(model, stats)
    assert np.array_equal(predict(model, images), predict(normalized, images))
    ratio = forward(normalized, images[0]) * stats.lambdas[-1]
    assert np.allclose(ratio, forward(model, images[0]))


def test_normalized_activations_bounded(images):
    model = lenet5(seed=5)
    normalized = normalize_model(model, collect_max_activations(model, images))
    _, activations = forward(normalized, images, record=True)
    for i in normalized.param_layers:
        assert activations[i + 1 if i + 1 < len(activations) else i].max() <= 1.0 + 1e-12


def test_normalize_and_convert(images):
    model = lenet5(seed=6)
    stats = collect_max_activations(model, images)
    net = normalize_and_convert(model, stats)
    assert [layer.kind for layer in net.layers] == [
        "conv2d", "avgpool2d", "conv2d", "avgpool2d", "flatten", "dense", "dense", "dense",
    ]
    assert [net.layers[i].threshold for i in net.spiking_layers] == [1.0] * 5
    assert net.normalization.lambdas == stats.lambdas
    assert net.layer_shapes()[-1] == (10,)


def test_snn_network_validation():
    with pytest.raises(SchemaError):
        SnnNetwork([SnnLayer("relu")], (2,))
    with pytest.raises(SchemaError):
        SnnNetwork([SnnLayer("dense", np.ones((1, 2)), threshold=0.0)], (2,))


def test_save_load_snn(tmp_path, images):
    model = lenet5(seed=7)
    net = normalize_and_convert(model, collect_max_activations(model, images))
    path = tmp_path / "snn.json"
    save_snn(net, path)
    loaded = load_snn(path)
    assert loaded.input_shape == net.input_shape
    assert loaded.normalization == net.normalization
    for a, b in zip(net.layers, loaded.layers):
        assert a.kind == b.kind
        assert a.threshold == b.threshold
        if a.has_weights:
            assert np.array_equal(a.weights, b.weights)


def test_load_snn_rejects_ann(tmp_path):
    path = tmp_path / "ann.json"
    save_model(lenet5(seed=0), path)
    with pytest.raises(SchemaError):
        load_snn(path)
