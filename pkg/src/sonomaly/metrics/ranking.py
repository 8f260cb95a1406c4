"""Threshold-free ranking metrics: percentile, ROC AUC, best F1."""

from __future__ import annotations

import numpy as np

from ..errors import DataError, MetricUndefinedError


def percentile(values, q: float) -> float:
    """Linear-interpolation percentile of a non-empty collection.

    rank r = (q / 100) * (n - 1); result interpolates between the two
    neighboring order statistics.
    """
    values = np.asarray(values, dtype=np.float64).ravel()
    if values.size == 0:
        raise DataError("percentile of an empty collection is undefined")
    if not 0 <= q <= 100:
        raise DataError(f"q must be in [0, 100], got {q}")
    return float(np.percentile(values, q))


def _check_binary(scores, labels):
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(labels).ravel().astype(np.int64)
    if scores.size != labels.size:
        raise DataError("scores and labels must have equal length")
    if scores.size == 0:
        raise DataError("empty score collection")
    if not np.isin(labels, (0, 1)).all():
        raise DataError("labels must be 0 or 1")
    n_pos = int(labels.sum())
    if n_pos == 0 or n_pos == labels.size:
        raise MetricUndefinedError("metric undefined: both classes must be present")
    return scores, labels, n_pos


def roc_auc(scores, labels) -> float:
    """Rank-based AUC: P(random positive outranks random negative), ties 1/2."""
    scores, labels, n_pos = _check_binary(scores, labels)
    n_neg = scores.size - n_pos
    order = np.argsort(scores, kind="mergesort")
    sorted_scores = scores[order]
    ranks = np.empty(scores.size, dtype=np.float64)
    i = 0
    while i < scores.size:  # average ranks within tie groups (1-based)
        j = i
        while j + 1 < scores.size and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    pos_rank_sum = float(ranks[labels == 1].sum())
    return (pos_rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def best_f1(scores, labels) -> tuple[float, float]:
    """Max F1 over thresholds at every distinct score (prediction: s >= t).

    Returns (best F1, lowest threshold achieving it).
    """
    scores, labels, n_pos = _check_binary(scores, labels)
    order = np.argsort(-scores, kind="mergesort")
    s_desc = scores[order]
    l_desc = labels[order]
    tp_cum = np.cumsum(l_desc)
    pred_cum = np.arange(1, scores.size + 1)
    # keep only the last index of each distinct score: that is where
    # "predict everything >= s" lands
    is_last = np.ones(scores.size, dtype=bool)
    is_last[:-1] = s_desc[:-1] != s_desc[1:]
    tp = tp_cum[is_last].astype(np.float64)
    pred = pred_cum[is_last].astype(np.float64)
    thresholds = s_desc[is_last]
    f1 = 2.0 * tp / (pred + n_pos)  # 2TP / (2TP + FP + FN)
    best = f1.max()
    candidates = thresholds[f1 == best]
    return float(best), float(candidates.min())
