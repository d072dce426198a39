"""Shared fixtures and helpers for the test suite."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from mctsteg.types import CostPair, Domain, PixelMatrix

settings.register_profile(
    "suite",
    deadline=None,
    max_examples=30,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("suite")


def pixel_matrix(values, domain=Domain.SPATIAL) -> PixelMatrix:
    return PixelMatrix(np.asarray(values, dtype=np.float64), domain)


def cost_pair(plus, minus=None) -> CostPair:
    plus = np.asarray(plus, dtype=np.float64)
    minus = plus.copy() if minus is None else np.asarray(minus, dtype=np.float64)
    return CostPair(plus, minus)


def random_cost_pair(gen: np.random.Generator, shape, wet_fraction=0.0) -> CostPair:
    """Log-uniform costs spanning several decades, optionally with wet spots."""
    from mctsteg.types import WET_COST

    def plane():
        p = np.exp(gen.uniform(np.log(1e-3), np.log(1e4), size=shape))
        if wet_fraction > 0:
            p[gen.random(shape) < wet_fraction] = WET_COST
        return p

    return CostPair(plane(), plane())


class HashEnvironment:
    """Deterministic scorer: confidence is a pure function of the pixels.

    Stays inside [lo, hi] so it can be kept clear of the early-stop
    threshold; distinct images get effectively independent scores.
    """

    def __init__(self, lo=0.1, hi=0.9):
        self.lo, self.hi = lo, hi

    def score(self, img):
        import hashlib

        from mctsteg.environment import EnvScore

        digest = hashlib.md5(np.ascontiguousarray(img.data).tobytes()).digest()
        u = int.from_bytes(digest[:8], "big") / 2**64
        return EnvScore(self.lo + (self.hi - self.lo) * u)


class SpyEnvironment:
    """Wraps a scorer and records every call, in order."""

    def __init__(self, inner, keep_images=False):
        self.inner = inner
        self.confs = []
        self.images = []
        self.keep_images = keep_images

    def score(self, img):
        result = self.inner.score(img)
        self.confs.append(result.cover_confidence)
        if self.keep_images:
            self.images.append(img.data.copy())
        return result


@pytest.fixture
def gen():
    return np.random.default_rng(0xC0FFEE)


@pytest.fixture
def small_cover():
    from mctsteg import rng, synth

    return synth.synth_cover(rng.mix(11, 0), 32)
