from .anomaly_map import AnomalyMap, postprocess, sample_score
from .padim import GaussianField, padim_fit, padim_score
from .patchcore import MemoryBank, coverage_radius, greedy_k_center, nearest_distances, patchcore_fit, patchcore_score
from .persistence import DETECTOR_IDS, load_model, model_crc, save_model
from .stfpm import StfpmConfig, StudentModel, stfpm_loss_and_grads, stfpm_score, stfpm_train

DETECTOR_NAMES = ("padim", "patchcore", "stfpm")

__all__ = [
    "AnomalyMap",
    "postprocess",
    "sample_score",
    "GaussianField",
    "padim_fit",
    "padim_score",
    "MemoryBank",
    "coverage_radius",
    "greedy_k_center",
    "nearest_distances",
    "patchcore_fit",
    "patchcore_score",
    "DETECTOR_IDS",
    "load_model",
    "model_crc",
    "save_model",
    "StfpmConfig",
    "StudentModel",
    "stfpm_loss_and_grads",
    "stfpm_score",
    "stfpm_train",
    "DETECTOR_NAMES",
]
