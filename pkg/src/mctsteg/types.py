"""Core value types shared across modules.

Matrices are numpy arrays in row-major layout, shape (height, width).
Spatial images hold integer values in [0, 255] stored as float64 so that
cost filtering and +-1 arithmetic need no casts. Transform-domain images
are unconstrained reals.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, DomainError

# Cost at or above this value marks a modification direction as forbidden
# ("wet"). Exactly representable in float64.
WET_COST = 1.0e13


class Domain(enum.Enum):
    SPATIAL = "spatial"
    JPEG = "jpeg"


@dataclass
class PixelMatrix:
    """A single-channel image plane plus its domain tag."""

    data: np.ndarray
    domain: Domain = Domain.SPATIAL

    def __post_init__(self) -> None:
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim != 2 or arr.size == 0:
            raise DimensionError("image data must be a non-empty 2-d matrix")
        if not np.all(np.isfinite(arr)):
            raise DomainError("image data must be finite")
        if self.domain is Domain.SPATIAL:
            if np.any(arr < 0) or np.any(arr > 255):
                raise DomainError("spatial pixel values must lie in [0, 255]")
            if np.any(arr != np.round(arr)):
                raise DomainError("spatial pixel values must be integers")
        self.data = arr

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    def copy(self) -> "PixelMatrix":
        out = object.__new__(PixelMatrix)
        out.data = self.data.copy()
        out.domain = self.domain
        return out


@dataclass
class ModificationMap:
    """Per-element embedding changes; entries are -1, 0 or +1."""

    values: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.values)
        if arr.ndim != 2 or arr.size == 0:
            raise DimensionError("modification map must be a non-empty 2-d matrix")
        if not np.isin(arr, (-1, 0, 1)).all():
            raise DomainError("modification entries must be ternary (-1, 0, +1)")
        self.values = arr.astype(np.int8)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


@dataclass
class CostPair:
    """Directional embedding costs: rho_plus for +1, rho_minus for -1.

    Entries at or above WET_COST forbid that direction. Both planes share
    one shape and every entry is a finite nonnegative real.
    """

    rho_plus: np.ndarray
    rho_minus: np.ndarray

    def __post_init__(self) -> None:
        rp = np.asarray(self.rho_plus, dtype=np.float64)
        rm = np.asarray(self.rho_minus, dtype=np.float64)
        if rp.ndim != 2 or rp.size == 0:
            raise DimensionError("cost planes must be non-empty 2-d matrices")
        if rp.shape != rm.shape:
            raise DimensionError(
                f"cost plane shapes differ: {rp.shape} vs {rm.shape}"
            )
        for name, plane in (("rho_plus", rp), ("rho_minus", rm)):
            if not np.all(np.isfinite(plane)):
                raise DomainError(f"{name} must be finite")
            if np.any(plane < 0):
                raise DomainError(f"{name} must be nonnegative")
        self.rho_plus = rp
        self.rho_minus = rm

    @property
    def height(self) -> int:
        return self.rho_plus.shape[0]

    @property
    def width(self) -> int:
        return self.rho_plus.shape[1]

    @property
    def wet_plus(self) -> np.ndarray:
        return self.rho_plus >= WET_COST

    @property
    def wet_minus(self) -> np.ndarray:
        return self.rho_minus >= WET_COST

    def copy(self) -> "CostPair":
        out = object.__new__(CostPair)
        out.rho_plus = self.rho_plus.copy()
        out.rho_minus = self.rho_minus.copy()
        return out
