"""Faithfulness: does masking the input with the anomaly map change the score?

Both variants operate element-wise on spectrogram values (the map only exists
in the T x F plane):
    v1 keeps the high-map region:        x1 = x * M
    v2 swaps it against the background:  x2 = x * (1 - M) + bg * M
and each reports f(x) - f(x_filtered) for the detector's sample-level score
function f, which must accept a spectrogram directly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..audio.spectrogram import Spectrogram
from ..detectors.anomaly_map import AnomalyMap
from ..errors import ParameterError, ShapeError


@dataclass(frozen=True)
class FaithfulnessResult:
    ff_v1: float
    ff_v2: float


def faithfulness(
    score_fn: Callable[[Spectrogram], float],
    x: Spectrogram,
    map_: AnomalyMap,
    bg: Spectrogram,
) -> FaithfulnessResult:
    if not map_.normalized:
        raise ParameterError("faithfulness expects a normalized anomaly map")
    if x.shape != map_.values.shape or x.shape != bg.shape:
        raise ShapeError(
            f"shape mismatch: x {x.shape}, map {map_.values.shape}, bg {bg.shape}"
        )
    m = map_.values
    base = float(score_fn(x))
    x_v1 = x.with_values(x.values * m)
    x_v2 = x.with_values(x.values * (1.0 - m) + bg.values * m)
    return FaithfulnessResult(
        ff_v1=base - float(score_fn(x_v1)),
        ff_v2=base - float(score_fn(x_v2)),
    )


def aggregate_ff(results: list[FaithfulnessResult]) -> dict:
    """Mean +/- sample standard deviation (ddof=1; 0.0 for a single sample)."""
    if not results:
        return {"ff_v1_mean": float("nan"), "ff_v1_std": float("nan"),
                "ff_v2_mean": float("nan"), "ff_v2_std": float("nan")}
    v1 = np.array([r.ff_v1 for r in results])
    v2 = np.array([r.ff_v2 for r in results])
    std = lambda v: float(np.std(v, ddof=1)) if v.size > 1 else 0.0
    return {
        "ff_v1_mean": float(v1.mean()),
        "ff_v1_std": std(v1),
        "ff_v2_mean": float(v2.mean()),
        "ff_v2_std": std(v2),
    }
