"""Deterministic random streams.

Every run has one 64-bit root seed. Independent streams are derived per
*purpose* (service priorities, routing, arrivals, tie re-draws, ...) with
``numpy.random.SeedSequence(root, spawn_key=(purpose,))`` feeding a Philox
4x64 counter-based generator. Simulators consume each stream in fixed-size
slot blocks with a fixed number of draws per (slot, node), so the draw used
at a given (purpose, slot, node) is a fixed function of the root seed.
"""
from __future__ import annotations

import struct

import numpy as np

SERVICE = 1
ROUTING = 2
ARRIVALS = 3
TIES = 4
SEARCH = 5
SAMPLES = 6

BLOCK_SLOTS = 4096


def stream(seed: int, purpose: int, *extra: int) -> np.random.Generator:
    """Independent generator for ``(seed, purpose, *extra)``."""
    ss = np.random.SeedSequence(int(seed) % 2**64, spawn_key=(purpose, *extra))
    return np.random.Generator(np.random.Philox(ss))


def derive_seed(seed: int, *key: int) -> int:
    """A 64-bit child seed that depends only on ``seed`` and ``key``."""
    ss = np.random.SeedSequence(int(seed) % 2**64, spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def float_key(x: float) -> int:
    """Stable integer key for a float (its IEEE-754 bit pattern)."""
    return struct.unpack("<Q", struct.pack("<d", float(x)))[0]


def as_generator(rng) -> np.random.Generator:
    """Accept a Generator, an int seed or None (seed 0)."""
    if isinstance(rng, np.random.Generator):
        return rng
    return stream(0 if rng is None else int(rng), SAMPLES)
