"""Synthetic covers for desk-scale experiments.

Real photographic corpora are too heavy for unit and acceptance runs, so
experiments here use procedurally generated covers: a smooth illumination
field plus band-limited texture whose local strength varies across the
frame. The mix leaves both smooth regions (where embedding is detectable)
and textured regions (where it is cheap), which is what the cost function
and the detector both need to have something to work with.

Every scene parameter is drawn per image. A corpus of fixed-recipe scenes
is too easy: a linear detector separates covers from stegos perfectly,
its confidences pin to the extremes, and reward differences between
embedding candidates vanish. Per-image variation keeps the detector's
decision boundary near the data, so candidate stegos score differently
and directional effects have room to show up.
"""

from __future__ import annotations

import numpy as np
from scipy.ndimage import gaussian_filter

from . import rng
from .types import Domain, PixelMatrix

_STREAM_SYNTH = 0x5C0FE


def synth_cover(seed: int, size: int = 64) -> PixelMatrix:
    """One cover image; deterministic in (seed, size)."""
    gen = rng.generator(seed, _STREAM_SYNTH)
    tex_sigma = gen.uniform(0.7, 2.5)
    coarse_sigma = gen.uniform(3.0, 6.0)
    tex_amp = gen.uniform(25.0, 60.0)
    coarse_amp = gen.uniform(20.0, 50.0)
    gate = gen.uniform(0.1, 0.35)
    power = gen.uniform(2.0, 3.0)
    brightness = gen.uniform(90.0, 150.0)
    contrast = gen.uniform(50.0, 85.0)

    base = gaussian_filter(gen.normal(size=(size, size)), sigma=size / 6.0)
    base = base / (np.abs(base).max() + 1e-9)
    texture = gaussian_filter(gen.normal(size=(size, size)), sigma=tex_sigma)
    coarse = gaussian_filter(gen.normal(size=(size, size)), sigma=coarse_sigma)
    strength = gaussian_filter(gen.random((size, size)), sigma=size / 8.0)
    strength = (strength - strength.min()) / (np.ptp(strength) + 1e-9)
    # Gating concentrates texture into contiguous busy patches: embedding
    # then crowds into those patches (change rates land near photographic
    # corpora) and cheap positions in one sublattice sit next to cheap
    # positions in another, which non-additive adjustment needs.
    strength = np.clip((strength - gate) / (1.0 - gate), 0.0, 1.0) ** power

    img = brightness + contrast * base + strength * (
        tex_amp * texture + coarse_amp * coarse
    )
    img = np.clip(np.round(img), 0, 255)
    return PixelMatrix(img, Domain.SPATIAL)


def synth_corpus(seed: int, count: int, size: int = 64) -> list[PixelMatrix]:
    """Deterministic list of covers; image k depends on (seed, k) only."""
    return [synth_cover(rng.mix(seed, k), size) for k in range(count)]
