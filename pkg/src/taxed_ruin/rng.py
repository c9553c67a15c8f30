"""Counter-based random numbers keyed by (seed, path, draw index).

Each draw is a pure function of its key, built from the SplitMix64 finaliser:
the path key is ``mix(mix(seed) + (path + 1) * G2)`` and draw ``k`` of that
path is ``mix(path_key + (k + 1) * G1)``, which is the SplitMix64 sequence
started from the path key. Draws therefore do not depend on how paths are
batched or scheduled across threads.
"""
from __future__ import annotations

import numpy as np

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_PATH_GAMMA = np.uint64(0xD1B54A32D192ED03)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_TWO53 = 2.0**-53


def mix64(z):
    """SplitMix64 output function (vectorised, wrapping uint64 arithmetic)."""
    z = np.asarray(z, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * _M1
        z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def splitmix64_sequence(seed: int, n: int) -> list[int]:
    """Reference sequential SplitMix64 (used to pin the mixer in tests)."""
    out = []
    state = seed & 0xFFFFFFFFFFFFFFFF
    for _ in range(n):
        state = (state + 0x9E3779B97F4A7C15) & 0xFFFFFFFFFFFFFFFF
        out.append(int(mix64(np.uint64(state))))
    return out


class CounterRNG:
    def __init__(self, seed: int):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self._seed_key = mix64(np.uint64(self.seed))

    def path_keys(self, path_ids) -> np.ndarray:
        p = np.asarray(path_ids, dtype=np.uint64)
        with np.errstate(over="ignore"):
            return mix64(self._seed_key + (p + np.uint64(1)) * _PATH_GAMMA)

    def bits(self, keys, counter) -> np.ndarray:
        c = np.asarray(counter, dtype=np.uint64)
        with np.errstate(over="ignore"):
            return mix64(keys + (c + np.uint64(1)) * GOLDEN)

    def uniform(self, keys, counter) -> np.ndarray:
        """Uniforms on the open interval (0, 1)."""
        b = self.bits(keys, counter) >> np.uint64(11)
        return (b.astype(np.float64) + 0.5) * _TWO53

    def exponential(self, keys, counter) -> np.ndarray:
        return -np.log(self.uniform(keys, counter))

    def normal(self, keys, counter) -> np.ndarray:
        """Standard normals by Box-Muller from draws ``2k`` and ``2k + 1``."""
        c = np.asarray(counter, dtype=np.uint64) * np.uint64(2)
        u1 = self.uniform(keys, c)
        u2 = self.uniform(keys, c + np.uint64(1))
        return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)
