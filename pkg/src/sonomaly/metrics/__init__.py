from .faithfulness import FaithfulnessResult, aggregate_ff, faithfulness
from .localization import (
    SpectLevelResult,
    au_pro,
    integrate_to_limit,
    spect_ground_truth,
    spect_level_metrics,
    spect_prediction,
    temporal_ground_truth,
    temporal_scores,
)
from .ranking import best_f1, percentile, roc_auc
from .report import CSV_COLUMNS, MetricsReport, ReportRow

__all__ = [
    "FaithfulnessResult",
    "aggregate_ff",
    "faithfulness",
    "SpectLevelResult",
    "au_pro",
    "integrate_to_limit",
    "spect_ground_truth",
    "spect_level_metrics",
    "spect_prediction",
    "temporal_ground_truth",
    "temporal_scores",
    "best_f1",
    "percentile",
    "roc_auc",
    "CSV_COLUMNS",
    "MetricsReport",
    "ReportRow",
]
