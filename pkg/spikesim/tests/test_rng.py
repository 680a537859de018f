import numpy as np
import pytest

from spikesim.rng import hash_key, uniform


def test_uniform_deterministic():
    pixels = np.arange(784)
    first = uniform(3, 17, pixels, 42)
    second = uniform(3, 17, pixels, 42)
    assert first.shape == (784,)
    assert np.array_equal(first, second)


def test_uniform_range():
    draws = uniform(0, 0, np.arange(10000), 5)
    assert draws.min() >= 0.0
    assert draws.max() < 1.0


@pytest.mark.parametrize("key", [(1, 0, 0, 0), (0, 1, 0, 0), (0, 0, 1, 0), (0, 0, 0, 1)])
def test_uniform_keys_differ(key):
    assert uniform(*key)[0] != uniform(0, 0, 0, 0)[0]


def test_hash_key_not_symmetric():
    assert hash_key(0, 1, 2, 3)[0] != hash_key(0, 2, 1, 3)[0]


def test_uniform_mean():
    draws = uniform(7, 0, 0, np.arange(10 ** 5))
    assert abs(np.mean(draws < 0.5) - 0.5) <= 0.005
    assert abs(draws.mean() - 0.5) <= 0.005


def test_uniform_large_seed():
    assert uniform(2 ** 64 + 5, 0, 0, 0)[0] == uniform(5, 0, 0, 0)[0]
