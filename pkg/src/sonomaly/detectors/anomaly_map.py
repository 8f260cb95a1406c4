"""Anomaly maps over the spectrogram plane, with post-processing."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.ndimage import gaussian_filter

from ..config import DEFAULT_SMOOTHING_SIGMA
from ..errors import ParameterError, ShapeError
from ..features.pyramid import CoordMap, bilinear_resize

SAMPLE_REDUCERS = ("max", "mean", "topk_mean")


@dataclass(frozen=True)
class AnomalyMap:
    """T x F matrix of per-cell anomaly scores for one sample."""

    values: np.ndarray
    normalized: bool = False
    detector: str = ""
    sample_id: str = ""

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", values)
        if values.ndim != 2 or values.size == 0:
            raise ShapeError("anomaly map must be a non-empty 2-D array")
        if not np.all(np.isfinite(values)):
            raise ParameterError("anomaly map contains non-finite values")
        if self.normalized:
            if values.min() < 0.0 or values.max() > 1.0:
                raise ParameterError("normalized map must lie in [0, 1]")

    def normalize(self) -> "AnomalyMap":
        """Min-max normalize to [0, 1]; a constant map becomes all zeros."""
        lo, hi = float(self.values.min()), float(self.values.max())
        if hi > lo:
            values = (self.values - lo) / (hi - lo)
        else:
            values = np.zeros_like(self.values)
        return replace(self, values=values, normalized=True)


def postprocess(
    patch_map: np.ndarray,
    coord: CoordMap,
    smoothing_sigma: float = DEFAULT_SMOOTHING_SIGMA,
    normalize: bool = False,
    detector: str = "",
    sample_id: str = "",
) -> AnomalyMap:
    """Upsample a patch-resolution map to T x F and smooth it.

    Bilinear upsampling to the coord map's (T, F), then a Gaussian blur of
    smoothing_sigma spectrogram cells truncated at 4 sigma (identity for
    sigma = 0). Optionally min-max normalizes to [0, 1].
    """
    patch_map = np.asarray(patch_map, dtype=np.float64)
    if patch_map.shape != (coord.h, coord.w):
        raise ShapeError(f"patch map {patch_map.shape} does not match coord {(coord.h, coord.w)}")
    if smoothing_sigma < 0:
        raise ParameterError("smoothing_sigma must be >= 0")
    up = bilinear_resize(patch_map, coord.t_size, coord.f_size)
    if smoothing_sigma > 0:
        up = gaussian_filter(up, sigma=smoothing_sigma, truncate=4.0)
    out = AnomalyMap(up, normalized=False, detector=detector, sample_id=sample_id)
    return out.normalize() if normalize else out


def sample_score(map_: AnomalyMap | np.ndarray, reduce: str = "max", top_k: int = 10) -> float:
    """Reduce a map to one sample-level score (default: map maximum)."""
    values = map_.values if isinstance(map_, AnomalyMap) else np.asarray(map_)
    if values.size == 0:
        raise ShapeError("cannot score an empty map")
    if reduce == "max":
        return float(values.max())
    if reduce == "mean":
        return float(values.mean())
    if reduce == "topk_mean":
        k = min(top_k, values.size)
        return float(np.sort(values, axis=None)[-k:].mean())
    raise ParameterError(f"unknown reducer {reduce!r}; expected one of {SAMPLE_REDUCERS}")
