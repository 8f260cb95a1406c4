"""Spectrogram-level and temporal-level localization metrics.

Ground truth comes from the isolated scaled-anomaly spectrogram: within the
injected region the top 40% most energetic cells are anomalous; on the time
axis, columns whose summed energy exceeds the interval's median. Predictions
binarize the anomaly map at its own 40th percentile (strict inequality, so
ties fall to "normal").
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import label as cc_label

from ..audio.spectrogram import Spectrogram
from ..config import (
    DEFAULT_PRO_FPR_LIMIT,
    DEFAULT_SPECT_PERCENTILE,
    DEFAULT_TEMPORAL_PERCENTILE,
    DEFAULT_TEMPORAL_TOP_K,
)
from ..errors import DataError, MetricUndefinedError, ParameterError, ShapeError
from ..detectors.anomaly_map import AnomalyMap
from .ranking import percentile, roc_auc

_CONN4 = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=int)


@dataclass(frozen=True)
class SpectLevelResult:
    f1: float
    roc: float
    pro: float


def spect_ground_truth(
    anomaly_spec: Spectrogram,
    region: tuple[int, int, int, int],
    energy_fraction: float = 0.4,
) -> np.ndarray:
    """Boolean T x F mask: top `energy_fraction` cells inside the region.

    region is a half-open (t0, t1, f0, f1) rectangle. The threshold is the
    k-th largest value with k = ceil(fraction * |region|); cells tied at the
    threshold are all included. Everything outside the region is normal.
    """
    t0, t1, f0, f1 = region
    t_size, f_size = anomaly_spec.shape
    if not (0 <= t0 < t1 <= t_size and 0 <= f0 < f1 <= f_size):
        raise ParameterError(f"region {region} empty or outside a {t_size}x{f_size} spectrogram")
    window = anomaly_spec.values[t0:t1, f0:f1]
    k = int(np.ceil(energy_fraction * window.size))
    k = max(1, min(k, window.size))
    threshold = np.sort(window, axis=None)[window.size - k]
    mask = np.zeros((t_size, f_size), dtype=bool)
    mask[t0:t1, f0:f1] = window >= threshold
    return mask


def spect_prediction(map_: AnomalyMap, q: float = DEFAULT_SPECT_PERCENTILE) -> np.ndarray:
    """Boolean mask of cells strictly above the map's own q-th percentile."""
    if not map_.normalized:
        raise ParameterError("spect_prediction expects a normalized anomaly map")
    threshold = percentile(map_.values, q)
    return map_.values > threshold


def _pro_curve_points(values_per_map, gts, n_neg):
    """(fpr, pro) points at every distinct threshold, descending, with a
    leading (0, 0) anchor. Predictions use value >= threshold."""
    all_values = np.concatenate([v.ravel() for v in values_per_map])
    thresholds = np.unique(all_values)[::-1]

    neg_sorted = np.sort(np.concatenate([v[~g].ravel() for v, g in zip(values_per_map, gts)]))
    regions = []  # sorted cell values of each connected gt region
    for v, g in zip(values_per_map, gts):
        labeled, n_regions = cc_label(g, structure=_CONN4)
        for r in range(1, n_regions + 1):
            regions.append(np.sort(v[labeled == r]))
    if not regions:
        raise MetricUndefinedError("AU-PRO undefined: ground truth has no anomalous cells")

    # count of elements >= t via searchsorted on ascending sorted arrays
    fpr = (n_neg - np.searchsorted(neg_sorted, thresholds, side="left")) / n_neg
    pro = np.zeros(thresholds.size)
    for reg in regions:
        pro += (reg.size - np.searchsorted(reg, thresholds, side="left")) / reg.size
    pro /= len(regions)

    xs = np.concatenate(([0.0], fpr))
    ys = np.concatenate(([0.0], pro))
    return xs, ys


def integrate_to_limit(xs: np.ndarray, ys: np.ndarray, limit: float) -> float:
    """Trapezoid area under (xs, ys) walked in order, stopping at xs = limit."""
    area = 0.0
    for i in range(len(xs) - 1):
        x0, y0, x1, y1 = xs[i], ys[i], xs[i + 1], ys[i + 1]
        if x0 >= limit:
            break
        if x1 <= limit:
            area += (x1 - x0) * (y0 + y1) / 2.0
        else:
            yb = y0 + (y1 - y0) * (limit - x0) / (x1 - x0)
            area += (limit - x0) * (y0 + yb) / 2.0
            break
    return area


def au_pro(
    maps: list[np.ndarray],
    gt_masks: list[np.ndarray],
    fpr_limit: float = DEFAULT_PRO_FPR_LIMIT,
) -> float:
    """Area under the per-region-overlap vs FPR curve, normalized by the limit.

    Regions are 4-connected components of each mask; overlap at a threshold is
    averaged over all regions of all maps; FPR pools every negative cell.
    """
    if fpr_limit <= 0 or fpr_limit > 1:
        raise ParameterError("fpr_limit must be in (0, 1]")
    values_per_map = [np.asarray(m, dtype=np.float64) for m in maps]
    gts = [np.asarray(g, dtype=bool) for g in gt_masks]
    if len(values_per_map) != len(gts) or not values_per_map:
        raise DataError("need equally many maps and masks, at least one pair")
    for v, g in zip(values_per_map, gts):
        if v.shape != g.shape:
            raise ShapeError(f"map {v.shape} vs mask {g.shape}")
    n_neg = int(sum((~g).sum() for g in gts))
    if n_neg == 0:
        raise MetricUndefinedError("AU-PRO undefined: no negative cells")
    xs, ys = _pro_curve_points(values_per_map, gts, n_neg)
    return integrate_to_limit(xs, ys, fpr_limit) / fpr_limit


def spect_level_metrics(
    maps: list[AnomalyMap],
    gt_masks: list[np.ndarray],
    pred_percentile: float = DEFAULT_SPECT_PERCENTILE,
    fpr_limit: float = DEFAULT_PRO_FPR_LIMIT,
) -> SpectLevelResult:
    """F1 / ROC / AU-PRO over all cells of all test maps.

    F1 binarizes each per-map normalized prediction at its 40th percentile;
    ROC and AU-PRO rank the raw (unnormalized) cell values so scores stay
    comparable across maps.
    """
    if len(maps) != len(gt_masks) or not maps:
        raise DataError("need equally many maps and masks, at least one pair")
    gts = [np.asarray(g, dtype=bool) for g in gt_masks]
    for m, g in zip(maps, gts):
        if m.values.shape != g.shape:
            raise ShapeError(f"map {m.values.shape} vs mask {g.shape}")

    tp = fp = fn = 0
    for m, g in zip(maps, gts):
        pred = spect_prediction(m if m.normalized else m.normalize(), pred_percentile)
        tp += int(np.count_nonzero(pred & g))
        fp += int(np.count_nonzero(pred & ~g))
        fn += int(np.count_nonzero(~pred & g))
    f1 = 2.0 * tp / (2.0 * tp + fp + fn) if (2 * tp + fp + fn) > 0 else 0.0

    raw = [m.values for m in maps]
    cell_scores = np.concatenate([v.ravel() for v in raw])
    cell_labels = np.concatenate([g.ravel() for g in gts]).astype(int)
    roc = roc_auc(cell_scores, cell_labels)
    pro = au_pro(raw, gts, fpr_limit)
    return SpectLevelResult(f1=f1, roc=roc, pro=pro)


def temporal_ground_truth(
    anomaly_spec: Spectrogram,
    col_interval: tuple[int, int],
    q: float = DEFAULT_TEMPORAL_PERCENTILE,
) -> np.ndarray:
    """Length-T booleans: injected columns whose summed energy exceeds the
    interval's q-th percentile (strict). Columns outside are normal.

    The spectrogram already stores log energies, so values are summed as-is.
    """
    c0, c1 = col_interval
    t_size = anomaly_spec.shape[0]
    if not (0 <= c0 < c1 <= t_size):
        raise ParameterError(f"column interval {col_interval} empty or outside length {t_size}")
    energy = anomaly_spec.values[c0:c1, :].sum(axis=1)
    threshold = percentile(energy, q)
    out = np.zeros(t_size, dtype=bool)
    out[c0:c1] = energy > threshold
    return out


def temporal_scores(map_: AnomalyMap, top_k: int = DEFAULT_TEMPORAL_TOP_K) -> np.ndarray:
    """Per-instant score: mean of the top-k values in each map column
    (all values when fewer than k frequencies exist)."""
    values = map_.values
    k = min(top_k, values.shape[1])
    part = np.sort(values, axis=1)[:, values.shape[1] - k :]
    return part.mean(axis=1)
