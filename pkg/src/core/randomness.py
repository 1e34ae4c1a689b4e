"""Reproducible random streams, Gaussian sampling and shuffling.

The generator is a counter-based SplitMix64: a stream is a 64-bit key plus
a counter, and its k-th output is ``mix(key + (k + 1) * GAMMA)``. Keys are
derived from ``(global_seed, stream_id)`` with the same mixer, so any image's
stream can be rebuilt from the manifest without replaying other streams.
All integer arithmetic is explicit uint64 and bit-identical on every
platform.
"""

import math
from typing import Sequence, TypeVar

import numpy as np

from .errors import ParameterError
from .model import IMAGE_PIXELS, GaussianVector

T = TypeVar("T")

ALGORITHM_TAG = "splitmix64-ctr/v1"

GAMMA = np.uint64(0x9E3779B97F4A7C15)
MIX_MUL_1 = np.uint64(0xBF58476D1CE4E5B9)
MIX_MUL_2 = np.uint64(0x94D049BB133111EB)
STREAM_SALT = np.uint64(0xD1B54A32D192ED03)

_SHIFT_30 = np.uint64(30)
_SHIFT_27 = np.uint64(27)
_SHIFT_31 = np.uint64(31)
_SHIFT_11 = np.uint64(11)
_INV_2_53 = 1.0 / 9007199254740992.0
_U64_MASK = (1 << 64) - 1


def splitmix64_mix(z: np.ndarray) -> np.ndarray:
    """SplitMix64 finalizer over a uint64 array (wrapping arithmetic)."""
    with np.errstate(over="ignore"):
        z = (z ^ (z >> _SHIFT_30)) * MIX_MUL_1
        z = (z ^ (z >> _SHIFT_27)) * MIX_MUL_2
        return z ^ (z >> _SHIFT_31)


def _u64(value: int) -> np.ndarray:
    return np.array([value & _U64_MASK], dtype=np.uint64)


class RngStream:
    """Single-owner random stream; not safe to share while in use."""

    algorithm_tag = ALGORITHM_TAG

    def __init__(self, key: int, stream_id: int):
        self.key = key & _U64_MASK
        self.stream_id = stream_id
        self.counter = 0

    def __repr__(self) -> str:
        return f"RngStream(stream_id={self.stream_id}, counter={self.counter})"

    def next_uint64(self, n: int) -> np.ndarray:
        """Return the next ``n`` raw 64-bit outputs and advance the counter."""
        steps = np.arange(self.counter + 1, self.counter + n + 1, dtype=np.uint64)
        self.counter += n
        with np.errstate(over="ignore"):
            states = steps * GAMMA + np.uint64(self.key)
        return splitmix64_mix(states)

    def uniform(self, n: int) -> np.ndarray:
        """Return ``n`` uniforms in [0, 1) built from the top 53 bits."""
        bits = self.next_uint64(n) >> _SHIFT_11
        return bits.astype(np.float64) * _INV_2_53


def derive_stream(global_seed: int, stream_id: int) -> RngStream:
    """Derive the stream for ``stream_id`` under ``global_seed``."""
    seed_key = splitmix64_mix(_u64(global_seed))
    id_key = splitmix64_mix(_u64(stream_id) ^ STREAM_SALT)
    key = splitmix64_mix(seed_key ^ id_key)
    return RngStream(int(key[0]), stream_id)


def box_muller(u1: np.ndarray | float, u2: np.ndarray | float) -> tuple[np.ndarray, np.ndarray]:
    """Map uniforms (u1 in (0, 1], u2 in [0, 1)) to two standard normals."""
    radius = np.sqrt(-2.0 * np.log(u1))
    angle = 2.0 * math.pi * np.asarray(u2, dtype=np.float64)
    return radius * np.cos(angle), radius * np.sin(angle)


def sample_gaussian(stream: RngStream, n: int, mean: float, variance: float) -> np.ndarray:
    """Draw ``n`` values from N(mean, variance) with Box-Muller.

    Each pair consumes exactly two uniforms and both outputs are used in
    order, so the stream position depends only on ``n``.

    Raises:
        ParameterError: if variance <= 0 or n <= 0.
    """
    if variance <= 0:
        raise ParameterError(f"variance must be positive, got {variance}")
    if n <= 0:
        raise ParameterError(f"sample count must be positive, got {n}")
    pairs = (n + 1) // 2
    u = stream.uniform(2 * pairs)
    z0, z1 = box_muller(1.0 - u[0::2], u[1::2])
    z = np.empty(2 * pairs, dtype=np.float64)
    z[0::2] = z0
    z[1::2] = z1
    return mean + math.sqrt(variance) * z[:n]


def gaussian_vector(
    stream: RngStream, variance: float = 1024.0, size: int = IMAGE_PIXELS
) -> GaussianVector:
    """Draw one image's worth of N(0, variance) values."""
    return GaussianVector(sample_gaussian(stream, size, 0.0, variance))


def permutation(stream: RngStream, n: int) -> np.ndarray:
    """Fisher-Yates permutation of ``range(n)``; consumes n - 1 uniforms."""
    order = list(range(n))
    if n > 1:
        bounds = np.arange(n, 1, -1, dtype=np.float64)
        picks = (stream.uniform(n - 1) * bounds).astype(np.int64).tolist()
        for i, j in zip(range(n - 1, 0, -1), picks):
            order[i], order[j] = order[j], order[i]
    return np.asarray(order, dtype=np.int64)


def shuffle(stream: RngStream, items: Sequence[T] | np.ndarray) -> list[T] | np.ndarray:
    """Uniformly permute ``items``; arrays come back as arrays, else lists."""
    perm = permutation(stream, len(items))
    if isinstance(items, np.ndarray):
        return items[perm]
    return [items[k] for k in perm]
