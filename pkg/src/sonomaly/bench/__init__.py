from .corpus import (
    CorpusConfig,
    DatasetManifest,
    ManifestClip,
    build_corpus,
    injection_columns,
)
from .experiment import ExperimentConfig, evaluate_stored_maps, run_experiment
from .heatmaps import emit_heatmaps, triptych

__all__ = [
    "CorpusConfig",
    "DatasetManifest",
    "ManifestClip",
    "build_corpus",
    "injection_columns",
    "ExperimentConfig",
    "evaluate_stored_maps",
    "run_experiment",
    "emit_heatmaps",
    "triptych",
]
