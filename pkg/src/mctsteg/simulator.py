"""Payload-constrained optimal embedding simulator.

Given directional costs and a payload in bits, the minimal-distortion
change probabilities follow a Boltzmann distribution

    p(+1) = exp(-lambda*rho_plus) / (1 + exp(-lambda*rho_plus) + exp(-lambda*rho_minus))

with lambda chosen so the total ternary entropy of the map equals the
payload. Wet directions get probability exactly zero. Sampling is
elementwise and driven by a counter-based generator, so a map is a pure
function of (probabilities, seed).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import rng
from .errors import (
    ConvergenceError,
    DimensionError,
    DomainError,
    PayloadError,
)
from .types import WET_COST, CostPair, Domain, ModificationMap, PixelMatrix

_LAMBDA_LO = 1.0e-7
_LAMBDA_HI = 1.0e3
_MAX_BISECTIONS = 200
# Doubling (halving) steps allowed when the root lies outside the default
# bracket; 64 steps span roughly [5e-27, 2e22] in scaled-lambda units.
_MAX_BRACKET_GROWTHS = 64
ENTROPY_TOLERANCE_BITS = 1.0e-3

_LOG2_3 = float(np.log2(3.0))


@dataclass
class EmbedProbabilities:
    """Fitted per-element change probabilities.

    lam is expressed in raw cost units (it absorbs any common scale factor
    of the cost pair). Elements outside the fitted mask carry zeros.
    """

    p_plus: np.ndarray
    p_minus: np.ndarray
    lam: float
    target_entropy_bits: float
    realized_entropy_bits: float

    @property
    def p_change(self) -> np.ndarray:
        return self.p_plus + self.p_minus


def ternary_entropy_bits(p_plus: np.ndarray, p_minus: np.ndarray) -> float:
    """Total entropy in bits of independent ternary choices."""
    p0 = np.clip(1.0 - p_plus - p_minus, 0.0, None)
    total = 0.0
    for p in (p_plus, p_minus, p0):
        pos = p[p > 0]
        total -= float(np.sum(pos * np.log2(pos)))
    return total


def _probabilities(scaled_plus, scaled_minus, lam):
    ep = np.exp(-lam * scaled_plus)
    em = np.exp(-lam * scaled_minus)
    z = 1.0 + ep + em
    return ep / z, em / z


def fit_probabilities(
    cost: CostPair, payload_bits: float, mask: np.ndarray | None = None
) -> EmbedProbabilities:
    """Bisect lambda until the masked map's entropy matches the payload.

    The bisection runs on normalized costs over a default bracket
    [1e-7, 1e3], grown by doubling whichever end still excludes the root
    (entropy is monotone in lambda, so the end tests are exact), with at
    most 200 halvings once bracketed. The returned lam is mapped back to
    raw cost units, so scaling the cost pair by a positive constant leaves
    the probabilities unchanged and divides lam by that factor.

    The normalizer is the per-element minimum cost at quantile
    payload / capacity: the fraction of elements that must sit near the
    maximum-entropy regime to carry the payload. Anchoring there keeps the
    solution inside the fixed bracket even when most of the map is orders
    of magnitude more expensive than the embeddable region (a mostly-flat
    image, say), which a plain median cannot guarantee.
    """
    if payload_bits < 0:
        raise PayloadError("payload must be nonnegative")
    if mask is None:
        mask = np.ones(cost.rho_plus.shape, dtype=bool)
    else:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != cost.rho_plus.shape:
            raise DimensionError("mask shape does not match cost shape")

    shape = cost.rho_plus.shape
    wet_p = cost.wet_plus[mask]
    wet_m = cost.wet_minus[mask]
    n_usable = int(np.sum(~(wet_p & wet_m)))
    # An element with both directions free can hold log2(3) bits; one with
    # a single free direction only log2(2) = 1 bit.
    n_single = int(np.sum(wet_p ^ wet_m))
    capacity = _LOG2_3 * (n_usable - n_single) + float(n_single)
    if payload_bits > capacity:
        raise PayloadError(
            f"payload {payload_bits:.3f} bits exceeds capacity "
            f"{capacity:.3f} bits of {n_usable} embeddable elements"
        )

    p_plus = np.zeros(shape)
    p_minus = np.zeros(shape)
    if payload_bits == 0:
        return EmbedProbabilities(p_plus, p_minus, float("inf"), 0.0, 0.0)

    rho_p = cost.rho_plus[mask]
    rho_m = cost.rho_minus[mask]
    usable = ~(wet_p & wet_m)
    min_cost = np.minimum(
        np.where(wet_p, np.inf, rho_p), np.where(wet_m, np.inf, rho_m)
    )[usable]
    fraction = min(payload_bits / capacity, 1.0)
    scale = float(np.quantile(min_cost, fraction)) if min_cost.size else 1.0
    if scale <= 0.0 or not np.isfinite(scale):
        finite = np.concatenate([rho_p[~wet_p], rho_m[~wet_m]])
        scale = float(np.median(finite)) if finite.size else 1.0
    if scale <= 0.0:
        scale = 1.0
    sp = np.where(wet_p, np.inf, rho_p / scale)
    sm = np.where(wet_m, np.inf, rho_m / scale)

    def entropy_at(lam: float) -> tuple[float, np.ndarray, np.ndarray]:
        pp, pm = _probabilities(sp, sm, lam)
        return ternary_entropy_bits(pp, pm), pp, pm

    lo, hi = _LAMBDA_LO, _LAMBDA_HI
    h_lo, pp, pm = entropy_at(lo)
    best = (abs(h_lo - payload_bits), lo, h_lo, pp, pm)
    h_hi, pp, pm = entropy_at(hi)
    if abs(h_hi - payload_bits) < best[0]:
        best = (abs(h_hi - payload_bits), hi, h_hi, pp, pm)

    # Cliff-shaped cost maps can push the root outside the default
    # bracket (e.g. the payload quantile landing mid-cliff scales the
    # cheap side down to ~1e-8); grow the bracket until it straddles.
    for _ in range(_MAX_BRACKET_GROWTHS):
        if h_hi <= payload_bits:
            break
        hi *= 2.0
        h_hi, pp, pm = entropy_at(hi)
        if abs(h_hi - payload_bits) < best[0]:
            best = (abs(h_hi - payload_bits), hi, h_hi, pp, pm)
    for _ in range(_MAX_BRACKET_GROWTHS):
        if h_lo >= payload_bits:
            break
        lo *= 0.5
        h_lo, pp, pm = entropy_at(lo)
        if abs(h_lo - payload_bits) < best[0]:
            best = (abs(h_lo - payload_bits), lo, h_lo, pp, pm)

    for _ in range(_MAX_BISECTIONS):
        if best[0] <= ENTROPY_TOLERANCE_BITS:
            break
        mid = 0.5 * (lo + hi)
        h_mid, pp, pm = entropy_at(mid)
        if abs(h_mid - payload_bits) < best[0]:
            best = (abs(h_mid - payload_bits), mid, h_mid, pp, pm)
        if h_mid > payload_bits:
            lo = mid
        else:
            hi = mid
    err, lam_scaled, realized, pp, pm = best
    if err > ENTROPY_TOLERANCE_BITS:
        raise ConvergenceError(
            f"entropy {realized:.6f} bits missed payload {payload_bits:.6f} "
            f"by {err:.2e} after {_MAX_BISECTIONS} bisections"
        )
    p_plus[mask] = pp
    p_minus[mask] = pm
    return EmbedProbabilities(
        p_plus, p_minus, lam_scaled / scale, float(payload_bits), realized
    )


def sample(probs: EmbedProbabilities, rng_seed: int) -> ModificationMap:
    """Draw one modification map; deterministic for a given seed."""
    gen = rng.generator(rng_seed)
    u = gen.random(probs.p_plus.shape)
    values = np.zeros(probs.p_plus.shape, dtype=np.int8)
    values[u < probs.p_plus] = 1
    values[(u >= probs.p_plus) & (u < probs.p_plus + probs.p_minus)] = -1
    return ModificationMap(values)


def apply(img: PixelMatrix, mods: ModificationMap) -> PixelMatrix:
    """Add the modification map to the image."""
    if (img.height, img.width) != (mods.height, mods.width):
        raise DimensionError("modification shape does not match image")
    data = img.data + mods.values
    if img.domain is Domain.SPATIAL and (np.any(data < 0) or np.any(data > 255)):
        raise DomainError(
            "modification pushes a pixel outside [0, 255]; "
            "wet-cost bookkeeping failed upstream"
        )
    return PixelMatrix(data, img.domain)


def change_rate(mods: ModificationMap) -> float:
    """Fraction of elements modified."""
    return float(np.count_nonzero(mods.values)) / mods.values.size
