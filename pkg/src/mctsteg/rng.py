"""Deterministic random streams.

Every stochastic step draws from Philox, a counter-based generator whose
output is identical across platforms for a given key. Independent streams
are derived by folding a context path (stream kind, sublattice index, ...)
into the second key word with a splitmix64 hash, so seeds never collide by
arithmetic accident and the derivation is reproducible from the documented
constants below.

Stream kinds:
  STREAM_BASELINE   whole-image reference stego sample
  STREAM_SAMPLER    per-sublattice candidate sampling (path: kind, t)
  STREAM_TREE       tree rollout action choices (path: kind, t)
  STREAM_TRAIN      detector training shuffles
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1

STREAM_BASELINE = 1
STREAM_SAMPLER = 2
STREAM_TREE = 3
STREAM_TRAIN = 4


def _splitmix(z: int) -> int:
    z = (z + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def mix(*parts: int) -> int:
    """Fold integers into one 64-bit stream id (order-sensitive)."""
    acc = 0
    for part in parts:
        acc = _splitmix(acc ^ _splitmix(part & _MASK64))
    return acc


def generator(seed: int, *path: int) -> np.random.Generator:
    """Philox generator keyed on (seed, mix(path))."""
    key = np.array([seed & _MASK64, mix(*path)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def image_seed(run_seed: int, image_index: int) -> int:
    """Per-image seed for batch runs; depends on manifest order only."""
    return mix(run_seed, 0x1A6E, image_index)
