"""Non-additive embedding engine.

The engine embeds a payload in four passes, one per sublattice. The first
sublattice is embedded with unadjusted costs. For each later sublattice it
repeats, within a search budget: pick a polarity matrix by tree search,
divide the matching directional costs by alpha, fit and sample a
candidate segment on top of the image embedded so far, score the full
candidate against the environmental model, and feed the scaled score gap
back into the tree. The best-scoring candidate seen is committed.

The reward for a candidate Y is f_c(Y) - f_c(Z), where Z is a reference
stego carrying the whole payload with unadjusted costs, sampled once per
image. Positive rewards are scaled up (x10 by default) before tree
feedback so promising branches separate quickly.

Sampling inside one sublattice pass reuses a stream keyed by (seed,
sublattice) only, so a given polarity matrix always produces the same
candidate; the search is a deterministic function of the polarity space.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import convolve2d

from . import mcts, rng, simulator
from .cost import hill_cost
from .errors import DimensionError, PayloadError, StegError
from .lattice import (
    SUBLATTICE_COUNT,
    AdjustmentOrder,
    SchemeKind,
    SublatticeScheme,
    ddo_order,
    decompose,
)
from .mcts import Budget, PolarityMatrix
from .types import CostPair, ModificationMap, PixelMatrix

_CROSS = np.array([[0.0, 1.0, 0.0], [1.0, 0.0, 1.0], [0.0, 1.0, 0.0]])


class CostSource(enum.Enum):
    BUILTIN_HILL = "hill"
    EXTERNAL_FILE = "file"


class Termination(enum.Enum):
    MAX_SEARCHES = "max_searches"
    CONFIDENCE_THRESHOLD = "confidence_threshold"


@dataclass
class EmbedPlan:
    """Everything one embed needs besides the cover itself."""

    payload_bits_total: float
    scheme: SublatticeScheme
    env: object  # anything with .score(PixelMatrix) -> EnvScore
    budget: Budget = field(default_factory=Budget)
    rng_seed: int = 0
    cost_source: CostSource = CostSource.BUILTIN_HILL
    external_costs: CostPair | None = None
    adjust_first: bool = False

    def __post_init__(self) -> None:
        if self.payload_bits_total < 0:
            raise PayloadError("payload must be nonnegative")
        if self.cost_source is CostSource.EXTERNAL_FILE:
            if self.external_costs is None:
                raise StegError("external cost source needs a cost pair")
        elif self.external_costs is not None:
            raise StegError("external costs given but cost source is builtin")
        if not hasattr(self.env, "score"):
            raise StegError("environment handle must expose score()")


@dataclass
class SublatticeTrace:
    sublattice_index: int
    searches_used: int
    r_top: float
    terminated_by: Termination | None
    realized_entropy_bits: float


@dataclass
class StegoResult:
    stego: PixelMatrix
    mods: ModificationMap
    per_sublattice: list
    baseline_confidence: float
    final_confidence: float


def scale_reward(r: float, budget: Budget) -> float:
    """Asymmetric reward shaping: gains count reward_scale_pos-fold."""
    if r >= 0:
        return r * budget.reward_scale_pos
    return r * budget.reward_scale_neg


def reward(env, candidate: PixelMatrix, baseline_confidence: float,
           budget: Budget | None = None) -> tuple[float, float]:
    """Score gap against the reference stego, raw and scaled."""
    budget = budget or Budget()
    r = env.score(candidate).cover_confidence - baseline_confidence
    return r, scale_reward(r, budget)


def adjust_costs(
    cost: CostPair, gamma: PolarityMatrix, alpha: float, order: AdjustmentOrder
) -> CostPair:
    """Divide the cost of each polarity-preferred direction by alpha.

    gamma's k-th value applies to order's k-th element. Wet entries stay
    wet: a preference cannot re-enable a forbidden direction.
    """
    if alpha <= 1.0:
        raise ValueError("alpha must exceed 1")
    if gamma.size > order.size:
        raise DimensionError(
            f"polarity matrix covers {gamma.size} elements, order has {order.size}"
        )
    out = cost.copy()
    k = gamma.depth_assigned
    rows, cols = order.rows[:k], order.cols[:k]
    vals = gamma.values[:k]
    plus_sel = vals == 1
    minus_sel = vals == -1
    pr, pc = rows[plus_sel], cols[plus_sel]
    keep = ~cost.wet_plus[pr, pc]
    out.rho_plus[pr[keep], pc[keep]] /= alpha
    mr, mc = rows[minus_sel], cols[minus_sel]
    keep = ~cost.wet_minus[mr, mc]
    out.rho_minus[mr[keep], mc[keep]] /= alpha
    return out


def cmd_neighbor_sums(mods: ModificationMap) -> np.ndarray:
    """Sum of the four axis neighbours' modifications, zero off the edge."""
    return convolve2d(
        mods.values.astype(np.float64), _CROSS, mode="same", boundary="fill"
    )


def cmd_adjust(
    cost: CostPair, partial_mods: ModificationMap, alpha: float,
    position: tuple[int, int],
) -> CostPair:
    """Clustering rule at one position: if the neighbours' modification
    sum exceeds +1 the +1 direction gets cheaper, below -1 the -1
    direction does."""
    if alpha <= 1.0:
        raise ValueError("alpha must exceed 1")
    i, j = position
    if not (0 <= i < cost.height and 0 <= j < cost.width):
        raise DimensionError(f"position {position} outside cost planes")
    out = cost.copy()
    s = cmd_neighbor_sums(partial_mods)[i, j]
    if s > 1 and not cost.wet_plus[i, j]:
        out.rho_plus[i, j] /= alpha
    elif s < -1 and not cost.wet_minus[i, j]:
        out.rho_minus[i, j] /= alpha
    return out


def _cmd_adjust_all(cost: CostPair, partial_mods: ModificationMap,
                    alpha: float) -> CostPair:
    """Vectorized clustering rule over every position at once."""
    out = cost.copy()
    s = cmd_neighbor_sums(partial_mods)
    up = (s > 1) & ~cost.wet_plus
    down = (s < -1) & ~cost.wet_minus
    out.rho_plus[up] /= alpha
    out.rho_minus[down] /= alpha
    return out


def _costs_for(img: PixelMatrix, source: CostSource,
               external: CostPair | None) -> CostPair:
    if source is CostSource.BUILTIN_HILL:
        return hill_cost(img)
    # Static file costs cannot be recomputed from intermediate images.
    if (external.height, external.width) != (img.height, img.width):
        raise DimensionError("external cost shape does not match image")
    return external


def _zero_trace(index: int) -> SublatticeTrace:
    return SublatticeTrace(index, 0, 0.0, None, 0.0)


def embed(cover: PixelMatrix, plan: EmbedPlan) -> StegoResult:
    """Run the full four-pass embedding and return the committed stego."""
    scheme = plan.scheme
    if (scheme.height, scheme.width) != (cover.height, cover.width):
        raise DimensionError("scheme shape does not match cover")
    budget = plan.budget
    seed = plan.rng_seed
    payload_seg = plan.payload_bits_total / SUBLATTICE_COUNT

    base_costs = _costs_for(cover, plan.cost_source, plan.external_costs)

    # Reference stego: whole payload, unadjusted costs, sampled once.
    base_probs = simulator.fit_probabilities(base_costs, plan.payload_bits_total)
    z_mods = simulator.sample(base_probs, rng.mix(seed, rng.STREAM_BASELINE))
    z_img = simulator.apply(cover, z_mods)
    base_conf = plan.env.score(z_img).cover_confidence

    if plan.payload_bits_total == 0:
        zero = ModificationMap(np.zeros(cover.data.shape, dtype=np.int8))
        traces = [_zero_trace(t) for t in range(SUBLATTICE_COUNT)]
        return StegoResult(cover.copy(), zero, traces, base_conf, base_conf)

    current = cover
    traces = []
    for t in range(SUBLATTICE_COUNT):
        mask = scheme.mask(t)
        if t == 0:
            costs_t = base_costs
        else:
            costs_t = _costs_for(current, plan.cost_source, plan.external_costs)

        if t == 0 and not plan.adjust_first:
            probs = simulator.fit_probabilities(costs_t, payload_seg, mask)
            mods_t = simulator.sample(probs, rng.mix(seed, rng.STREAM_SAMPLER, t))
            current = simulator.apply(current, mods_t)
            traces.append(
                SublatticeTrace(t, 0, 0.0, None, probs.realized_entropy_bits)
            )
            continue

        order = ddo_order(costs_t, scheme, t)
        size = order.size
        root = mcts.new_root()
        tree_gen = rng.generator(seed, rng.STREAM_TREE, t)
        sampler_seed = rng.mix(seed, rng.STREAM_SAMPLER, t)

        r_top = None
        best = None
        searches = 0
        terminated = Termination.MAX_SEARCHES
        while searches < budget.max_searches:
            leaf = mcts.search(root, size, tree_gen, budget.exploration_c)
            gamma = mcts.gamma_of(leaf, size)
            adjusted = adjust_costs(costs_t, gamma, budget.alpha, order)
            probs = simulator.fit_probabilities(adjusted, payload_seg, mask)
            mods_t = simulator.sample(probs, sampler_seed)
            candidate = simulator.apply(current, mods_t)
            conf = plan.env.score(candidate).cover_confidence
            r = conf - base_conf
            mcts.backpropagate(leaf, scale_reward(r, budget))
            searches += 1
            if r_top is None or r > r_top:
                r_top = r
                best = (candidate, probs.realized_entropy_bits)
            if conf >= budget.confidence_threshold:
                terminated = Termination.CONFIDENCE_THRESHOLD
                break

        current, entropy_bits = best
        traces.append(SublatticeTrace(t, searches, r_top, terminated, entropy_bits))

    mods = ModificationMap((current.data - cover.data).astype(np.int8))
    final_conf = plan.env.score(current).cover_confidence
    return StegoResult(current, mods, traces, base_conf, final_conf)


def plain_embed(
    cover: PixelMatrix,
    payload_bits: float,
    rng_seed: int = 0,
    costs: CostPair | None = None,
) -> tuple[PixelMatrix, ModificationMap]:
    """Single-pass additive baseline: fit once over the whole image."""
    costs = costs if costs is not None else hill_cost(cover)
    probs = simulator.fit_probabilities(costs, payload_bits)
    mods = simulator.sample(probs, rng.mix(rng_seed, rng.STREAM_BASELINE))
    return simulator.apply(cover, mods), mods


def cmd_embed(
    cover: PixelMatrix,
    payload_bits: float,
    alpha: float = 9.0,
    rng_seed: int = 0,
    kind: SchemeKind = SchemeKind.SPATIAL_2X2,
    costs: CostPair | None = None,
) -> tuple[PixelMatrix, ModificationMap]:
    """Clustering baseline: four passes, each pass pulls modification
    directions toward the already-embedded neighbourhood majority."""
    scheme = decompose(cover.width, cover.height, kind)
    payload_seg = payload_bits / SUBLATTICE_COUNT
    external = costs
    current = cover
    for t in range(SUBLATTICE_COUNT):
        if external is not None:
            costs_t = external
        elif t == 0:
            costs_t = hill_cost(cover)
        else:
            costs_t = hill_cost(current)
        if t > 0:
            partial = ModificationMap(
                (current.data - cover.data).astype(np.int8)
            )
            costs_t = _cmd_adjust_all(costs_t, partial, alpha)
        probs = simulator.fit_probabilities(costs_t, payload_seg, scheme.mask(t))
        mods_t = simulator.sample(probs, rng.mix(rng_seed, rng.STREAM_SAMPLER, t))
        current = simulator.apply(current, mods_t)
    mods = ModificationMap((current.data - cover.data).astype(np.int8))
    return current, mods
