# File: services/random_streams.py (Counter-based random streams keyed by seed, purpose, agent and day)

"""
Every random draw in a run comes from a Philox generator whose key is derived
from (seed, purpose, agent id, day). Streams never share state, so a run is
reproducible from its seed alone, paired arms of an experiment see the same
draws wherever their behaviour coincides, and dropping one agent leaves the
other agents' streams untouched.
"""

import math
from enum import IntEnum
from typing import Dict, Tuple

import numpy as np

_WORD = 1 << 32


class StreamPurpose(IntEnum):
    POPULATION = 0
    ASSIGNMENT = 1
    NETWORK = 2
    BEHAVIOR = 3
    CONTACT_CLOCK = 4
    CONTACT_RECIPIENT = 5
    LIGHT_SWITCH = 6
    REPLICATION = 7


def _spawn_key(purpose: StreamPurpose, words: Tuple[int, ...]) -> Tuple[int, ...]:
    # SeedSequence wants non-negative words; warm-up days and ticks are negative
    return (int(purpose),) + tuple(int(w) % _WORD for w in words)


def stream_key(seed: int, purpose: StreamPurpose, *words: int) -> np.ndarray:
    sequence = np.random.SeedSequence(entropy=int(seed), spawn_key=_spawn_key(purpose, words))
    return sequence.generate_state(2, dtype=np.uint64)


def counter_stream(seed: int, purpose: StreamPurpose, *words: int) -> np.random.Generator:
    """A fresh generator; equal arguments always give the same sequence."""
    return np.random.Generator(np.random.Philox(key=stream_key(seed, purpose, *words)))


def derive_seed(seed: int, purpose: StreamPurpose, *words: int) -> int:
    sequence = np.random.SeedSequence(entropy=int(seed), spawn_key=_spawn_key(purpose, words))
    return int(sequence.generate_state(1, dtype=np.uint32)[0])


def derive_replication_seed(seed_base: int, index: int) -> int:
    return derive_seed(seed_base, StreamPurpose.REPLICATION, index)


class StreamFactory:
    """Hands out the per-agent streams of one run."""

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._cache: Dict[Tuple[int, ...], np.random.Generator] = {}

    def user_day(self, user_id: int, day: int, purpose: StreamPurpose = StreamPurpose.BEHAVIOR) -> np.random.Generator:
        key = (int(purpose), user_id, day)
        rng = self._cache.get(key)
        if rng is None:
            rng = counter_stream(self.seed, purpose, user_id, day)
            self._cache[key] = rng
        return rng

    def room_tick(self, room_index: int, tick: int) -> np.random.Generator:
        # Not cached: every light of the room must see the same first draw
        return counter_stream(self.seed, StreamPurpose.LIGHT_SWITCH, room_index, tick)

    def forget_day(self, day: int) -> None:
        self._cache = {key: rng for key, rng in self._cache.items() if key[2] != day}


def uniform_int(u: float, low: int, high: int) -> int:
    """Map u in [0, 1) onto the integers of [low, high)."""
    if high <= low:
        return low
    return min(high - 1, low + int(u * (high - low)))


def geometric_delay(u: float, p: float) -> int:
    """Ticks until the first success of a per-tick Bernoulli(p), by inverse transform (>= 1)."""
    if p >= 1.0:
        return 1
    if p <= 0.0:
        raise ValueError("geometric_delay needs p > 0")
    # 1 - u lies in (0, 1]
    delay = math.ceil(math.log1p(-u) / math.log1p(-p)) if u > 0.0 else 1
    return max(1, delay)
