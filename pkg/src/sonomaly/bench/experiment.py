"""Fit / score / evaluate sweeps over a corpus, producing the metrics report.

Each detector is wrapped in a small runner exposing fit(), a per-clip patch
map, and a spectrogram-level score function (the `f` used by faithfulness).
Detector failures abort only that detector's rows, with a diagnostic kept in
the report metadata; everything else proceeds.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from ..audio import Spectrogram, log_mel_spectrogram, read_wav
from ..config import (
    DEFAULT_CORESET_FRACTION,
    DEFAULT_PADIM_EPSILON,
    DEFAULT_PRO_FPR_LIMIT,
    DEFAULT_SAMPLE_REDUCE,
    DEFAULT_SMOOTHING_SIGMA,
    DEFAULT_SPECT_PERCENTILE,
    DEFAULT_TEMPORAL_PERCENTILE,
    DEFAULT_TEMPORAL_TOP_K,
)
from ..detectors import (
    AnomalyMap,
    padim_fit,
    padim_score,
    patchcore_fit,
    patchcore_score,
    postprocess,
    sample_score,
    save_model,
)
from ..detectors.stfpm import StfpmConfig, stfpm_score, stfpm_train
from ..errors import ConfigurationError, SonomalyError
from ..features import ExtractorSpec, ReferenceExtractor, align_and_concat, import_embeddings
from ..metrics import (
    MetricsReport,
    ReportRow,
    aggregate_ff,
    best_f1,
    faithfulness,
    roc_auc,
    spect_level_metrics,
    temporal_ground_truth,
    temporal_scores,
)
from ..pgm import pgm_to_mask, to_byte_image, write_pgm
from .corpus import DatasetManifest, ManifestClip, injection_columns


@dataclass(frozen=True)
class ExperimentConfig:
    detectors: tuple[str, ...] = ("padim", "patchcore", "stfpm")
    extractor: ExtractorSpec = field(default_factory=ExtractorSpec)
    embeddings_dir: str | None = None  # AEP1 files for kind="imported"
    padim_epsilon: float = DEFAULT_PADIM_EPSILON
    coreset_fraction: float = DEFAULT_CORESET_FRACTION
    stfpm: StfpmConfig = field(default_factory=StfpmConfig)
    smoothing_sigma: float = DEFAULT_SMOOTHING_SIGMA
    sample_reduce: str = DEFAULT_SAMPLE_REDUCE
    sample_top_k: int = 10
    spect_percentile: float = DEFAULT_SPECT_PERCENTILE
    temporal_percentile: float = DEFAULT_TEMPORAL_PERCENTILE
    temporal_top_k: int = DEFAULT_TEMPORAL_TOP_K
    pro_fpr_limit: float = DEFAULT_PRO_FPR_LIMIT
    emit_heatmaps: bool = False
    jobs: int = 1

    def to_dict(self) -> dict:
        return {
            "detectors": list(self.detectors),
            "extractor": self.extractor.to_dict(),
            "embeddings_dir": self.embeddings_dir,
            "padim_epsilon": self.padim_epsilon,
            "coreset_fraction": self.coreset_fraction,
            "stfpm": {
                "steps": self.stfpm.steps,
                "lr": self.stfpm.lr,
                "momentum": self.stfpm.momentum,
                "batch_size": self.stfpm.batch_size,
                "seed": self.stfpm.seed,
            },
            "smoothing_sigma": self.smoothing_sigma,
            "sample_reduce": self.sample_reduce,
            "sample_top_k": self.sample_top_k,
            "spect_percentile": self.spect_percentile,
            "temporal_percentile": self.temporal_percentile,
            "temporal_top_k": self.temporal_top_k,
            "pro_fpr_limit": self.pro_fpr_limit,
            "emit_heatmaps": self.emit_heatmaps,
            "jobs": self.jobs,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        kwargs = dict(d)
        if "detectors" in kwargs:
            kwargs["detectors"] = tuple(kwargs["detectors"])
        if "extractor" in kwargs:
            kwargs["extractor"] = ExtractorSpec.from_dict(kwargs["extractor"])
        if "stfpm" in kwargs:
            kwargs["stfpm"] = StfpmConfig(**kwargs["stfpm"])
        return cls(**kwargs)


@dataclass
class ClipData:
    clip: ManifestClip
    spec: Spectrogram
    grid: object = None  # PatchGrid, lazy
    gt_mask: np.ndarray | None = None


class _FeatureSource:
    """Uniform access to patch grids for reference or imported extractors."""

    def __init__(self, cfg: ExperimentConfig, corpus_dir: Path):
        self.cfg = cfg
        self.corpus_dir = corpus_dir
        self.reference = None
        if cfg.extractor.kind == "reference":
            self.reference = ReferenceExtractor(cfg.extractor)
        elif cfg.embeddings_dir is None:
            raise ConfigurationError("imported extractor needs embeddings_dir")

    def grid_for(self, clip_id: str, spec: Spectrogram):
        if self.reference is not None:
            pyramid = self.reference.extract(spec)
            selected = self.cfg.extractor.selected_levels
        else:
            pyramid = import_embeddings(Path(self.cfg.embeddings_dir) / f"{clip_id}.aep1")
            pyramid = pyramid.with_source_shape(*spec.values.shape)
            selected = self.cfg.extractor.selected_levels or pyramid.level_names
        return align_and_concat(pyramid, selected)

    def grid_from_spectrogram(self, spec: Spectrogram):
        """Feature path for re-scored (masked) spectrograms; reference only."""
        if self.reference is None:
            raise ConfigurationError(
                "faithfulness re-scoring needs a forward-capable (reference) extractor"
            )
        pyramid = self.reference.extract(spec)
        return align_and_concat(pyramid, self.cfg.extractor.selected_levels)


class _PadimRunner:
    name = "padim"

    def __init__(self, cfg: ExperimentConfig, source: _FeatureSource):
        self.cfg = cfg
        self.source = source
        self.model = None

    def fit(self, train: list[ClipData]):
        self.model = padim_fit([c.grid for c in train], self.cfg.padim_epsilon)

    def patch_map(self, clip: ClipData):
        return padim_score(clip.grid, self.model), clip.grid.coord

    def score_spectrogram(self, spec: Spectrogram) -> float:
        grid = self.source.grid_from_spectrogram(spec)
        tf_map = postprocess(padim_score(grid, self.model), grid.coord, self.cfg.smoothing_sigma)
        return sample_score(tf_map, self.cfg.sample_reduce, self.cfg.sample_top_k)


class _PatchcoreRunner:
    name = "patchcore"

    def __init__(self, cfg: ExperimentConfig, source: _FeatureSource):
        self.cfg = cfg
        self.source = source
        self.model = None

    def fit(self, train: list[ClipData]):
        self.model = patchcore_fit([c.grid for c in train], self.cfg.coreset_fraction)

    def patch_map(self, clip: ClipData):
        return patchcore_score(clip.grid, self.model), clip.grid.coord

    def score_spectrogram(self, spec: Spectrogram) -> float:
        grid = self.source.grid_from_spectrogram(spec)
        tf_map = postprocess(patchcore_score(grid, self.model), grid.coord, self.cfg.smoothing_sigma)
        return sample_score(tf_map, self.cfg.sample_reduce, self.cfg.sample_top_k)


class _StfpmRunner:
    name = "stfpm"

    def __init__(self, cfg: ExperimentConfig, source: _FeatureSource):
        self.cfg = cfg
        self.source = source
        self.model = None
        self.teacher = None

    def fit(self, train: list[ClipData]):
        spec = self.cfg.extractor
        if spec.kind != "reference":
            raise ConfigurationError("stfpm needs the forward-capable reference extractor")
        self.teacher = self.source.reference
        self.model = stfpm_train([c.spec for c in train], spec, self.cfg.stfpm)

    def patch_map(self, clip: ClipData):
        return stfpm_score(clip.spec, self.teacher, self.model)

    def score_spectrogram(self, spec: Spectrogram) -> float:
        patch, coord = stfpm_score(spec, self.teacher, self.model)
        tf_map = postprocess(patch, coord, self.cfg.smoothing_sigma)
        return sample_score(tf_map, self.cfg.sample_reduce, self.cfg.sample_top_k)


RUNNER_FACTORIES = {
    "padim": _PadimRunner,
    "patchcore": _PatchcoreRunner,
    "stfpm": _StfpmRunner,
}


def _load_clip_data(manifest: DatasetManifest, corpus_dir: Path) -> dict[str, ClipData]:
    data: dict[str, ClipData] = {}
    for clip in manifest.clips:
        wav = read_wav(corpus_dir / clip.wav_path)
        spec = log_mel_spectrogram(wav, manifest.spectrogram)
        gt = None
        if clip.gt_mask_path is not None:
            gt = pgm_to_mask(corpus_dir / clip.gt_mask_path)
        data[clip.clip_id] = ClipData(clip=clip, spec=spec, gt_mask=gt)
    return data


def _map_ordered(fn, items, jobs: int):
    if jobs <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def run_experiment(
    manifest: DatasetManifest,
    corpus_dir: str | Path,
    cfg: ExperimentConfig,
    out_dir: str | Path,
    extra_runners: dict | None = None,
) -> MetricsReport:
    """Fit every detector on the train split, score the test split, persist
    models / maps / previews, and assemble the full metrics report."""
    corpus_dir = Path(corpus_dir)
    out_dir = Path(out_dir)
    (out_dir / "models").mkdir(parents=True, exist_ok=True)

    data = _load_clip_data(manifest, corpus_dir)
    train = [data[c.clip_id] for c in manifest.train_clips()]
    test = [data[c.clip_id] for c in manifest.test_clips()]

    source = _FeatureSource(cfg, corpus_dir)
    needs_grids = bool(extra_runners) or any(d in ("padim", "patchcore") for d in cfg.detectors)
    if needs_grids:
        for cd in train + test:
            cd.grid = source.grid_for(cd.clip.clip_id, cd.spec)

    factories = dict(RUNNER_FACTORIES)
    if extra_runners:
        factories.update(extra_runners)

    report = MetricsReport(
        metadata={
            "seed": manifest.seed,
            "config": cfg.to_dict(),
            "snr_convention": "snr_db = 10*log10(P_scaled_anomaly / P_background) over the overlap window",
            "map_normalization": "per-map min-max before percentile thresholding",
            "diagnostics": [],
        }
    )

    for name in cfg.detectors:
        if name not in factories:
            report.metadata["diagnostics"].append(f"{name}: unknown detector, skipped")
            continue
        runner = factories[name](cfg, source)
        try:
            runner.fit(train)
            if name in RUNNER_FACTORIES and runner.model is not None:
                save_model(out_dir / "models" / f"{name}.avdm", name, runner.model, cfg.extractor)
            maps = _score_detector(runner, test, cfg, out_dir)
        except SonomalyError as exc:
            report.metadata["diagnostics"].append(f"{name}: {exc}")
            continue
        rows, notes = _metric_rows(name, manifest, corpus_dir, data, test, maps, cfg, runner)
        report.rows.extend(rows)
        report.metadata["diagnostics"].extend(notes)
        if cfg.emit_heatmaps:
            from .heatmaps import emit_heatmaps

            emit_heatmaps(manifest, corpus_dir, {name: maps}, out_dir / "heatmaps")

    report.write(out_dir)
    return report


def _score_detector(runner, test: list[ClipData], cfg: ExperimentConfig, out_dir: Path):
    maps_dir = out_dir / "maps" / runner.name
    maps_dir.mkdir(parents=True, exist_ok=True)

    def score_one(cd: ClipData) -> AnomalyMap:
        patch, coord = runner.patch_map(cd)
        return postprocess(
            patch, coord, cfg.smoothing_sigma, detector=runner.name, sample_id=cd.clip.clip_id
        )

    tf_maps = _map_ordered(score_one, test, cfg.jobs)
    maps: dict[str, AnomalyMap] = {}
    for cd, tf_map in zip(test, tf_maps):
        maps[cd.clip.clip_id] = tf_map
        np.save(maps_dir / f"{cd.clip.clip_id}.npy", tf_map.values.astype(np.float32))
        write_pgm(maps_dir / f"{cd.clip.clip_id}.pgm", to_byte_image(tf_map.values))
    return maps


def _metric_rows(
    detector: str,
    manifest: DatasetManifest,
    corpus_dir: Path,
    data: dict[str, ClipData],
    test: list[ClipData],
    maps: dict[str, AnomalyMap],
    cfg: ExperimentConfig,
    runner=None,
):
    """One ReportRow per SNR level; shared by run_experiment and eval."""
    rows: list[ReportRow] = []
    notes: list[str] = []
    normals = [cd for cd in test if cd.clip.label == "normal"]
    for snr in manifest.snr_levels():
        anoms = [
            cd
            for cd in test
            if cd.clip.label == "anomalous" and cd.clip.injection.snr_db == snr
        ]
        pool = normals + anoms
        if not anoms:
            continue
        row = ReportRow(method=detector, snr_db=snr)

        scores = [
            sample_score(maps[cd.clip.clip_id], cfg.sample_reduce, cfg.sample_top_k) for cd in pool
        ]
        labels = [1 if cd.clip.label == "anomalous" else 0 for cd in pool]
        try:
            row.sample_roc = roc_auc(scores, labels)
            row.sample_f1, _ = best_f1(scores, labels)
        except SonomalyError as exc:
            notes.append(f"{detector}@{snr}: sample metrics undefined: {exc}")

        spect_maps = [maps[cd.clip.clip_id] for cd in pool]
        gts = [
            cd.gt_mask
            if cd.gt_mask is not None
            else np.zeros(maps[cd.clip.clip_id].values.shape, dtype=bool)
            for cd in pool
        ]
        try:
            res = spect_level_metrics(spect_maps, gts, cfg.spect_percentile, cfg.pro_fpr_limit)
            row.spect_f1, row.spect_roc, row.spect_pro = res.f1, res.roc, res.pro
        except SonomalyError as exc:
            notes.append(f"{detector}@{snr}: spectrogram metrics undefined: {exc}")

        t_scores, t_labels = [], []
        for cd in pool:
            t_scores.append(temporal_scores(maps[cd.clip.clip_id], cfg.temporal_top_k))
            t_labels.append(_temporal_gt(cd, manifest, corpus_dir, cfg))
        try:
            flat_scores = np.concatenate(t_scores)
            flat_labels = np.concatenate(t_labels).astype(int)
            row.temp_roc = roc_auc(flat_scores, flat_labels)
            row.temp_f1, _ = best_f1(flat_scores, flat_labels)
        except SonomalyError as exc:
            notes.append(f"{detector}@{snr}: temporal metrics undefined: {exc}")

        if runner is not None:
            try:
                ff = [
                    faithfulness(
                        runner.score_spectrogram,
                        cd.spec,
                        maps[cd.clip.clip_id].normalize(),
                        _background_spec(cd, manifest, corpus_dir),
                    )
                    for cd in anoms
                ]
                agg = aggregate_ff(ff)
                row.ff_v1_mean, row.ff_v1_std = agg["ff_v1_mean"], agg["ff_v1_std"]
                row.ff_v2_mean, row.ff_v2_std = agg["ff_v2_mean"], agg["ff_v2_std"]
            except SonomalyError as exc:
                notes.append(f"{detector}@{snr}: faithfulness unavailable: {exc}")

        rows.append(row)
    return rows, notes


def _temporal_gt(cd: ClipData, manifest: DatasetManifest, corpus_dir: Path, cfg) -> np.ndarray:
    t_total = cd.spec.values.shape[0]
    if cd.clip.injection is None:
        return np.zeros(t_total, dtype=bool)
    rec = cd.clip.injection
    anomaly_spec = Spectrogram(
        np.load(corpus_dir / rec.anomaly_spec_ref).astype(np.float64),
        manifest.spectrogram,
        manifest.sample_rate,
    )
    c0, c1 = injection_columns(rec.t_start_sample, rec.t_end_sample, manifest.spectrogram, t_total)
    return temporal_ground_truth(anomaly_spec, (c0, c1), cfg.temporal_percentile)


def _background_spec(cd: ClipData, manifest: DatasetManifest, corpus_dir: Path) -> Spectrogram:
    rec = cd.clip.injection
    wav = read_wav(corpus_dir / rec.background_ref)
    return log_mel_spectrogram(wav, manifest.spectrogram)


def evaluate_stored_maps(
    manifest: DatasetManifest,
    corpus_dir: str | Path,
    maps_dir: str | Path,
    detectors: tuple[str, ...],
    cfg: ExperimentConfig,
    out_dir: str | Path,
    models_dir: str | Path | None = None,
) -> MetricsReport:
    """Recompute metrics from persisted anomaly maps (no re-scoring).

    Faithfulness needs a detector to re-score masked spectrograms, so FF
    columns stay empty unless models_dir provides the fitted models.
    """
    corpus_dir = Path(corpus_dir)
    maps_dir = Path(maps_dir)
    out_dir = Path(out_dir)
    data = _load_clip_data(manifest, corpus_dir)
    test = [data[c.clip_id] for c in manifest.test_clips()]

    report = MetricsReport(metadata={"seed": manifest.seed, "mode": "eval", "diagnostics": []})
    for name in detectors:
        det_dir = maps_dir / name
        maps: dict[str, AnomalyMap] = {}
        missing = []
        for cd in test:
            path = det_dir / f"{cd.clip.clip_id}.npy"
            if not path.exists():
                missing.append(cd.clip.clip_id)
                continue
            maps[cd.clip.clip_id] = AnomalyMap(
                np.load(path).astype(np.float64), detector=name, sample_id=cd.clip.clip_id
            )
        if missing:
            report.metadata["diagnostics"].append(f"{name}: missing maps for {missing[:5]}...")
            continue

        runner = None
        if models_dir is not None:
            runner = _rebuild_runner(name, Path(models_dir), cfg, corpus_dir)
        rows, notes = _metric_rows(name, manifest, corpus_dir, data, test, maps, cfg, runner)
        report.rows.extend(rows)
        report.metadata["diagnostics"].extend(notes)

    report.write(out_dir)
    return report


def _rebuild_runner(name: str, models_dir: Path, cfg: ExperimentConfig, corpus_dir: Path):
    from ..detectors import load_model

    path = models_dir / f"{name}.avdm"
    if not path.exists():
        return None
    loaded_name, model, extractor = load_model(path)
    run_cfg = replace(cfg, extractor=extractor)
    source = _FeatureSource(run_cfg, corpus_dir)
    runner = RUNNER_FACTORIES[loaded_name](run_cfg, source)
    runner.model = model
    if loaded_name == "stfpm":
        runner.teacher = source.reference
    return runner
