"""Counter-based random numbers: every draw is a pure function of its key,
so streams do not depend on the order in which images are simulated.

The key (seed, image, pixel, timestep) is folded through the splitmix64
finalizer; the top 53 bits give a float64 in [0, 1).
"""
from typing import Union

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = np.uint64(0x9E3779B97F4A7C15)
MIX1 = np.uint64(0xBF58476D1CE4E5B9)
MIX2 = np.uint64(0x94D049BB133111EB)
SHIFTS = (np.uint64(30), np.uint64(27), np.uint64(31))
FLOAT_SHIFT = np.uint64(11)
FLOAT_SCALE = 2.0 ** -53

IntLike = Union[int, np.ndarray]


def _to_uint64(value: IntLike) -> np.ndarray:
    if isinstance(value, np.ndarray):
        return value.astype(np.uint64)
    return np.array([int(value) & MASK64], dtype=np.uint64)


def mix64(x: np.ndarray) -> np.ndarray:
    """splitmix64 finalizer on an array of uint64."""
    with np.errstate(over="ignore"):
        z = x + GOLDEN
        z = (z ^ (z >> SHIFTS[0])) * MIX1
        z = (z ^ (z >> SHIFTS[1])) * MIX2
        return z ^ (z >> SHIFTS[2])


def hash_key(seed: IntLike, image: IntLike, pixel: IntLike, step: IntLike) -> np.ndarray:
    """RETURNS (np.ndarray): One 64-bit hash per broadcast key."""
    h = mix64(_to_uint64(seed))
    for part in (image, pixel, step):
        h = mix64(h ^ _to_uint64(part))
    return h


def uniform(seed: IntLike, image: IntLike, pixel: IntLike, step: IntLike) -> np.ndarray:
    """Uniform draws in [0, 1), one per broadcast key.

    seed (IntLike): Run seed.
    image (IntLike): Image index within the dataset.
    pixel (IntLike): Input index (usually an array of all pixel indices).
    step (IntLike): Timestep.
    RETURNS (np.ndarray): Float64 draws.
    """
    return (hash_key(seed, image, pixel, step) >> FLOAT_SHIFT) * FLOAT_SCALE
