"""Pydantic request / response models for the service endpoints.

Paths in requests are server-local: the service and its clients share a
filesystem (in-process by default, one machine otherwise).
"""

from __future__ import annotations

from pydantic import BaseModel, Field

from ..config import (
    DEFAULT_CHANNELS_PER_BLOCK,
    DEFAULT_CORESET_FRACTION,
    DEFAULT_EXTRACTOR_SEED,
    DEFAULT_PADIM_EPSILON,
    DEFAULT_SAMPLE_REDUCE,
    DEFAULT_SMOOTHING_SIGMA,
    DEFAULT_STFPM_BATCH,
    DEFAULT_STFPM_LR,
    DEFAULT_STFPM_MOMENTUM,
    DEFAULT_STFPM_STEPS,
)


class SpectrogramParamsModel(BaseModel):
    n_fft: int = 1024
    hop: int = 512
    n_mels: int = 64
    fmin: float = 50.0
    fmax: float = 8000.0
    log_offset: float = 1e-6


class ExtractorModel(BaseModel):
    kind: str = "reference"
    seed: int = DEFAULT_EXTRACTOR_SEED
    channels_per_block: list[int] = Field(default_factory=lambda: list(DEFAULT_CHANNELS_PER_BLOCK))
    selected_levels: list[str] = Field(default_factory=list)


class StfpmModel(BaseModel):
    steps: int = DEFAULT_STFPM_STEPS
    lr: float = DEFAULT_STFPM_LR
    momentum: float = DEFAULT_STFPM_MOMENTUM
    batch_size: int = DEFAULT_STFPM_BATCH
    seed: int = 0


class MixRequest(BaseModel):
    background_wav: str
    anomaly_wav: str
    snr_db: float
    t_start_sample: int = 0
    anomaly_id: str = "anomaly"
    out_dir: str
    name: str = "mixed.wav"


class MixResponse(BaseModel):
    mixed_wav: str
    record: dict


class SpectrogramRequest(BaseModel):
    wav: str
    out_dir: str
    name: str | None = None
    params: SpectrogramParamsModel | None = None


class SpectrogramResponse(BaseModel):
    npy_path: str
    shape: list[int]


class ExtractRequest(BaseModel):
    wav: str | None = None
    spectrogram_npy: str | None = None
    out_dir: str
    name: str | None = None
    extractor: ExtractorModel = Field(default_factory=ExtractorModel)
    params: SpectrogramParamsModel | None = None
    sample_rate: int | None = None


class LevelInfo(BaseModel):
    name: str
    h: int
    w: int
    c: int


class ExtractResponse(BaseModel):
    aep_path: str
    levels: list[LevelInfo]


class FitRequest(BaseModel):
    corpus_dir: str
    detector: str
    out_dir: str
    name: str | None = None
    extractor: ExtractorModel = Field(default_factory=ExtractorModel)
    embeddings_dir: str | None = None
    epsilon: float = DEFAULT_PADIM_EPSILON
    coreset_fraction: float = DEFAULT_CORESET_FRACTION
    stfpm: StfpmModel = Field(default_factory=StfpmModel)


class FitResponse(BaseModel):
    model_path: str
    crc32: int
    detector: str


class ScoreRequest(BaseModel):
    model_path: str
    wav: str | None = None
    embeddings: str | None = None
    out_dir: str
    name: str | None = None
    smoothing_sigma: float = DEFAULT_SMOOTHING_SIGMA
    sample_reduce: str = DEFAULT_SAMPLE_REDUCE
    sample_top_k: int = 10
    params: SpectrogramParamsModel | None = None
    normalize: bool = False


class ScoreResponse(BaseModel):
    sample_score: float
    map_npy: str
    map_pgm: str
    shape: list[int]
    detector: str


class MetricOptions(BaseModel):
    smoothing_sigma: float = DEFAULT_SMOOTHING_SIGMA
    sample_reduce: str = DEFAULT_SAMPLE_REDUCE
    sample_top_k: int = 10
    spect_percentile: float = 40.0
    temporal_percentile: float = 50.0
    temporal_top_k: int = 5
    pro_fpr_limit: float = 0.3


class EvalRequest(BaseModel):
    corpus_dir: str
    maps_dir: str
    detectors: list[str]
    out_dir: str
    models_dir: str | None = None
    metrics: MetricOptions = Field(default_factory=MetricOptions)


class CorpusModel(BaseModel):
    n_train: int = 40
    n_test_normal: int = 20
    n_test_anomalous: int = 20
    snr_levels: list[float] = Field(default_factory=lambda: [6.0, 0.0, -6.0])
    duration_s: float = 4.0
    sample_rate: int = 16000
    spectrogram: SpectrogramParamsModel = Field(default_factory=SpectrogramParamsModel)
    background_kinds: list[str] = Field(default_factory=lambda: ["tonal_background"])
    anomaly_kinds: list[str] = Field(
        default_factory=lambda: ["chirp_anomaly", "click_anomaly", "tone_burst_anomaly"]
    )
    anomaly_duration_range: list[float] = Field(default_factory=lambda: [0.5, 1.5])


class BenchRequest(BaseModel):
    out_dir: str
    seed: int = 7
    detectors: list[str] = Field(default_factory=lambda: ["padim", "patchcore", "stfpm"])
    corpus: CorpusModel = Field(default_factory=CorpusModel)
    extractor: ExtractorModel = Field(default_factory=ExtractorModel)
    epsilon: float = DEFAULT_PADIM_EPSILON
    coreset_fraction: float = DEFAULT_CORESET_FRACTION
    stfpm: StfpmModel = Field(default_factory=StfpmModel)
    metrics: MetricOptions = Field(default_factory=MetricOptions)
    emit_heatmaps: bool = False
    jobs: int = 1


class ReportRowModel(BaseModel):
    method: str
    snr_db: float
    sample_roc: float | None = None
    sample_f1: float | None = None
    spect_f1: float | None = None
    spect_pro: float | None = None
    spect_roc: float | None = None
    temp_f1: float | None = None
    temp_roc: float | None = None
    ff_v1_mean: float | None = None
    ff_v1_std: float | None = None
    ff_v2_mean: float | None = None
    ff_v2_std: float | None = None


class ReportResponse(BaseModel):
    report_csv: str
    report_json: str
    rows: list[ReportRowModel]
    diagnostics: list[str] = Field(default_factory=list)


class BenchResponse(ReportResponse):
    corpus_dir: str
    run_dir: str


class RenderRequest(BaseModel):
    report_json: str
    out_dir: str
    formats: list[str] = Field(default_factory=lambda: ["csv", "json"])
    corpus_dir: str | None = None
    maps_dir: str | None = None
    detectors: list[str] = Field(default_factory=list)


class RenderResponse(BaseModel):
    written: dict
    heatmaps: list[str]


class ErrorResponse(BaseModel):
    error: str
    message: str
