"""Directional embedding costs and the distortion they induce.

The builtin cost function is HILL: a high-pass residual is smoothed by two
averaging filters and inverted, so busy regions become cheap and smooth
regions expensive. Costs are symmetric in direction except at saturated
pixels, where the out-of-range direction is wet.
"""

from __future__ import annotations

import numpy as np
from scipy.signal import convolve2d

from .errors import DimensionError, DomainError
from .types import WET_COST, CostPair, Domain, ModificationMap, PixelMatrix

# High-pass residual kernel and the two averaging windows.
_KB = np.array([[-1.0, 2.0, -1.0], [2.0, -4.0, 2.0], [-1.0, 2.0, -1.0]])
_L1 = np.full((3, 3), 1.0 / 9.0)
_L2 = np.full((15, 15), 1.0 / 225.0)

# Smoothed residual magnitudes below this are clamped before inversion,
# bounding interior costs at 1e10 on constant regions.
_RESIDUAL_FLOOR = 1.0e-10


def hill_cost(img: PixelMatrix) -> CostPair:
    """Directional HILL costs with wet saturations.

    Pixels at 255 get a wet +1 cost, pixels at 0 a wet -1 cost, so the
    simulator can never push a value outside [0, 255].
    """
    if img.domain is not Domain.SPATIAL:
        raise DomainError("HILL costs are defined for spatial images only")
    if img.height < 3 or img.width < 3:
        raise DimensionError("HILL needs at least a 3x3 image")

    residual = convolve2d(img.data, _KB, mode="same", boundary="symm")
    smoothed = convolve2d(np.abs(residual), _L1, mode="same", boundary="symm")
    smoothed = np.maximum(smoothed, _RESIDUAL_FLOOR)
    rho = convolve2d(1.0 / smoothed, _L2, mode="same", boundary="symm")
    rho = np.minimum(rho, WET_COST)

    rho_plus = rho.copy()
    rho_minus = rho.copy()
    rho_plus[img.data >= 255] = WET_COST
    rho_minus[img.data <= 0] = WET_COST
    return CostPair(rho_plus, rho_minus)


def distortion(cost: CostPair, mods: ModificationMap) -> float:
    """Total additive cost of a modification map: sum of the chosen
    direction's cost over every changed element."""
    if (cost.height, cost.width) != (mods.height, mods.width):
        raise DimensionError(
            f"cost shape {(cost.height, cost.width)} does not match "
            f"modification shape {(mods.height, mods.width)}"
        )
    plus = cost.rho_plus[mods.values == 1]
    minus = cost.rho_minus[mods.values == -1]
    return float(plus.sum() + minus.sum())
