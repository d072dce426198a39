"""Sublattice decomposition and adjustment ordering.

Embedding proceeds over four interleaved sublattices so that every
element's neighbours are settled before or after it, never concurrently.
Spatial images interleave single pixels (2x2 phase); transform-domain
images interleave whole 8x8 blocks (block-parity phase).

Within one sublattice, elements are visited in distortion-defined order:
cheapest first by min(rho_plus, rho_minus), ties broken row-major, with
fully wet elements last. Polarity assignments walk this sequence.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError
from .types import CostPair

SUBLATTICE_COUNT = 4


class SchemeKind(enum.Enum):
    SPATIAL_2X2 = "spatial2x2"
    JPEG_BLOCK_PARITY = "jpegblock"


@dataclass
class SublatticeScheme:
    """Partition of an image grid into SUBLATTICE_COUNT index sets."""

    kind: SchemeKind
    labels: np.ndarray  # int8 (h, w), values in [0, SUBLATTICE_COUNT)

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    def mask(self, index: int) -> np.ndarray:
        if not 0 <= index < SUBLATTICE_COUNT:
            raise IndexError(f"sublattice index {index} out of range")
        return self.labels == index

    def size(self, index: int) -> int:
        return int(np.count_nonzero(self.mask(index)))


def decompose(width: int, height: int, kind: SchemeKind) -> SublatticeScheme:
    """Label every element with its sublattice index.

    Spatial: label = 2*(row % 2) + (col % 2).
    Block parity: label = 2*((row // 8) % 2) + ((col // 8) % 2); both
    dimensions must be divisible by 8.
    """
    if width <= 0 or height <= 0:
        raise DimensionError("decomposition needs positive dimensions")
    rows = np.arange(height)[:, None]
    cols = np.arange(width)[None, :]
    if kind is SchemeKind.SPATIAL_2X2:
        labels = 2 * (rows % 2) + (cols % 2)
    elif kind is SchemeKind.JPEG_BLOCK_PARITY:
        if width % 8 or height % 8:
            raise DimensionError(
                f"block-parity scheme needs dimensions divisible by 8, "
                f"got {width}x{height}"
            )
        labels = 2 * ((rows // 8) % 2) + ((cols // 8) % 2)
    else:
        raise ValueError(f"unknown scheme kind {kind!r}")
    return SublatticeScheme(kind, labels.astype(np.int8))


@dataclass
class AdjustmentOrder:
    """Visit sequence for one sublattice: coords[k] is the k-th element."""

    sublattice_index: int
    rows: np.ndarray
    cols: np.ndarray

    @property
    def size(self) -> int:
        return self.rows.size

    def coords(self) -> list[tuple[int, int]]:
        return list(zip(self.rows.tolist(), self.cols.tolist()))


def ddo_order(cost: CostPair, scheme: SublatticeScheme, index: int) -> AdjustmentOrder:
    """Distortion-defined order over one sublattice.

    Sorts by scalar cost min(rho_plus, rho_minus) ascending; the sort is
    stable over row-major element order, which implements the tie-break.
    Fully wet elements carry the maximal scalar cost and land last.
    """
    if (scheme.height, scheme.width) != (cost.height, cost.width):
        raise DimensionError("scheme shape does not match cost shape")
    mask = scheme.mask(index)
    rows, cols = np.nonzero(mask)  # row-major order
    scalar = np.minimum(cost.rho_plus[mask], cost.rho_minus[mask])
    order = np.argsort(scalar, kind="stable")
    return AdjustmentOrder(index, rows[order], cols[order])
