"""Security metrics and run reports.

fcc measures how strongly modifications cluster into same-polarity runs;
p_e is the minimum average detector error over all score thresholds. Both
operate on plain arrays produced elsewhere, so they stay usable on saved
run artifacts.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError
from .types import ModificationMap

REPORT_SCHEMA = "mctsteg-report-v1"


def fcc(mods: ModificationMap, n: int) -> float:
    """Flipping-cluster coefficient of order n.

    Counts horizontal and vertical runs of n+1 equal nonzero polarities.
    For each direction and polarity k the run frequency is the number of
    complete runs divided by the number of length-(n+1) windows, and the
    coefficient is the mean of the four frequencies.
    """
    if n < 2:
        raise ValueError("fcc order must be at least 2")
    if n > min(mods.height, mods.width):
        raise DimensionError(
            f"fcc order {n} exceeds matrix dimensions "
            f"{mods.height}x{mods.width}"
        )
    values = mods.values

    def run_frequency(arr: np.ndarray, k: int) -> float:
        rows, cols = arr.shape
        windows = cols - n
        if windows <= 0:
            return 0.0
        eq = arr == k
        runs = eq[:, : windows]
        for m in range(1, n + 1):
            runs = runs & eq[:, m : m + windows]
        return float(runs.sum()) / (rows * windows)

    h_part = run_frequency(values, 1) + run_frequency(values, -1)
    v_part = run_frequency(values.T, 1) + run_frequency(values.T, -1)
    return 0.25 * (h_part + v_part)


def p_e(scores_cover: np.ndarray, scores_stego: np.ndarray) -> float:
    """Minimum average of false-alarm and missed-detection rates.

    Scores are detector outputs oriented stego-high: an image is called
    stego when its score reaches the threshold. Cover-confidence scores
    must be flipped (1 - confidence) before calling. The sweep covers
    every observed score plus both extremes, so the result is the exact
    minimum over all achievable operating points and never exceeds 0.5.
    """
    cover = np.asarray(scores_cover, dtype=np.float64)
    stego = np.asarray(scores_stego, dtype=np.float64)
    if cover.size == 0 or stego.size == 0:
        raise ValueError("p_e needs scores from both classes")
    best = 0.5  # threshold above every score: call everything cover
    for tau in np.unique(np.concatenate([cover, stego])):
        p_fa = float(np.mean(cover >= tau))
        p_md = float(np.mean(stego < tau))
        best = min(best, 0.5 * (p_fa + p_md))
        # Also the operating point just above tau.
        p_fa = float(np.mean(cover > tau))
        p_md = float(np.mean(stego <= tau))
        best = min(best, 0.5 * (p_fa + p_md))
    return best


@dataclass
class MethodSummary:
    method: str
    images: int
    mean_change_rate: float
    mean_fcc: dict = field(default_factory=dict)  # order -> mean coefficient
    p_e: float | None = None


@dataclass
class Report:
    rows: list

    def to_json(self) -> str:
        payload = {
            "schema": REPORT_SCHEMA,
            "rows": [
                {
                    "method": r.method,
                    "images": r.images,
                    "mean_change_rate": r.mean_change_rate,
                    "mean_fcc": {str(k): v for k, v in sorted(r.mean_fcc.items())},
                    "p_e": r.p_e,
                }
                for r in self.rows
            ],
        }
        return json.dumps(payload, indent=2, sort_keys=True)

    def to_text(self) -> str:
        orders = sorted({k for r in self.rows for k in r.mean_fcc})
        headers = ["method", "images", "change_rate"]
        headers += [f"fcc{k}" for k in orders] + ["p_e"]
        lines = []
        for r in self.rows:
            cells = [r.method, str(r.images), f"{r.mean_change_rate:.4f}"]
            cells += [
                f"{r.mean_fcc[k]:.6f}" if k in r.mean_fcc else "-" for k in orders
            ]
            cells.append(f"{r.p_e:.4f}" if r.p_e is not None else "-")
            lines.append(cells)
        widths = [
            max(len(h), *(len(row[i]) for row in lines)) if lines else len(h)
            for i, h in enumerate(headers)
        ]
        fmt = "  ".join(f"{{:<{w}}}" for w in widths)
        out = [fmt.format(*headers)]
        out += [fmt.format(*row) for row in lines]
        return "\n".join(out)


def summarize_method(
    method: str,
    mods_list,
    fcc_orders=(2, 3, 4),
    detector_pe: float | None = None,
) -> MethodSummary:
    from .simulator import change_rate

    if not mods_list:
        raise ValueError(f"method {method!r} has no modification maps")
    rates = [change_rate(m) for m in mods_list]
    mean_fcc = {
        n: float(np.mean([fcc(m, n) for m in mods_list])) for n in fcc_orders
    }
    return MethodSummary(
        method, len(mods_list), float(np.mean(rates)), mean_fcc, detector_pe
    )
