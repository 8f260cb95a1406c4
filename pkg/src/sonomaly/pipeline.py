"""High-level operations shared by the service endpoints and the CLI client."""

from __future__ import annotations

import zlib
from dataclasses import replace
from pathlib import Path

import numpy as np

from .audio import (
    SpectrogramParams,
    Spectrogram,
    log_mel_spectrogram,
    mix_at_snr,
    read_wav,
    write_wav,
)
from .bench.corpus import DatasetManifest
from .bench.experiment import ExperimentConfig, _FeatureSource, _load_clip_data
from .detectors import (
    load_model,
    padim_fit,
    padim_score,
    patchcore_fit,
    patchcore_score,
    postprocess,
    sample_score,
    save_model,
)
from .detectors.stfpm import stfpm_score, stfpm_train
from .errors import ConfigurationError, ParameterError
from .features import ExtractorSpec, ReferenceExtractor, align_and_concat, export_embeddings, import_embeddings
from .features.pyramid import FeatureMapPyramid
from .pgm import to_byte_image, write_pgm


def mix_files(
    background_wav: str,
    anomaly_wav: str,
    snr_db: float,
    t_start_sample: int,
    out_dir: str,
    name: str = "mixed.wav",
    anomaly_id: str = "anomaly",
) -> dict:
    background = read_wav(background_wav)
    anomaly = read_wav(anomaly_wav)
    mixed, record = mix_at_snr(background, anomaly, snr_db, t_start_sample, anomaly_id)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / name
    write_wav(path, mixed)
    return {"mixed_wav": str(path), "record": record.to_dict()}


def spectrogram_file(
    wav: str, out_dir: str, name: str | None = None, params: SpectrogramParams | None = None
) -> dict:
    w = read_wav(wav)
    spec = log_mel_spectrogram(w, params)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = name or (Path(wav).stem + ".npy")
    path = out / stem
    np.save(path, spec.values.astype(np.float32))
    return {"npy_path": str(path), "shape": list(spec.shape)}


def extract_file(
    wav: str | None,
    spectrogram_npy: str | None,
    out_dir: str,
    extractor: ExtractorSpec,
    name: str | None = None,
    params: SpectrogramParams | None = None,
    sample_rate: int | None = None,
) -> dict:
    """Run the reference extractor and emit an AEP1 embedding file."""
    if extractor.kind != "reference":
        raise ConfigurationError("extract emits reference-extractor embeddings; "
                                 "imported embeddings already exist as AEP1 files")
    spec = _load_spectrogram(wav, spectrogram_npy, params, sample_rate)
    ex = ReferenceExtractor(extractor)
    pyramid = ex.extract(spec)
    f32 = FeatureMapPyramid(
        tuple(level.astype(np.float32) for level in pyramid.levels),
        pyramid.level_names,
        pyramid.source_shape,
    )
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = name or (Path(wav or spectrogram_npy).stem + ".aep1")
    path = out / stem
    export_embeddings(f32, path)
    levels = [
        {"name": n, "h": l.shape[0], "w": l.shape[1], "c": l.shape[2]}
        for n, l in zip(pyramid.level_names, pyramid.levels)
    ]
    return {"aep_path": str(path), "levels": levels}


def _load_spectrogram(wav, spectrogram_npy, params, sample_rate) -> Spectrogram:
    if (wav is None) == (spectrogram_npy is None):
        raise ParameterError("provide exactly one of wav or spectrogram_npy")
    if wav is not None:
        return log_mel_spectrogram(read_wav(wav), params)
    values = np.load(spectrogram_npy).astype(np.float64)
    return Spectrogram(values, params or SpectrogramParams(), sample_rate or 16000)


def fit_from_corpus(
    corpus_dir: str,
    detector: str,
    out_dir: str,
    cfg: ExperimentConfig,
    name: str | None = None,
) -> dict:
    """Fit one detector on a corpus' training split and persist the model."""
    corpus = Path(corpus_dir)
    manifest = DatasetManifest.load(corpus / "manifest.json")
    data = _load_clip_data(manifest, corpus)
    train = [data[c.clip_id] for c in manifest.train_clips()]
    source = _FeatureSource(cfg, corpus)

    if detector in ("padim", "patchcore"):
        for cd in train:
            cd.grid = source.grid_for(cd.clip.clip_id, cd.spec)
    if detector == "padim":
        model = padim_fit([c.grid for c in train], cfg.padim_epsilon)
    elif detector == "patchcore":
        model = patchcore_fit([c.grid for c in train], cfg.coreset_fraction)
    elif detector == "stfpm":
        model = stfpm_train([c.spec for c in train], cfg.extractor, cfg.stfpm)
    else:
        raise ParameterError(f"unknown detector {detector!r}")

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / (name or f"{detector}.avdm")
    save_model(path, detector, model, cfg.extractor)
    crc = zlib.crc32(path.read_bytes()[:-4]) & 0xFFFFFFFF
    dims = {
        "padim": lambda m: {"grid": list(m.shape)},
        "patchcore": lambda m: {"bank": list(m.coreset.shape)},
        "stfpm": lambda m: {"blocks": list(m.stack.channels_per_block)},
    }[detector](model)
    return {"model_path": str(path), "crc32": crc, "detector": detector, **dims}


def score_input(
    model_path: str,
    out_dir: str,
    wav: str | None = None,
    embeddings: str | None = None,
    name: str | None = None,
    smoothing_sigma: float | None = None,
    sample_reduce: str = "max",
    sample_top_k: int = 10,
    params: SpectrogramParams | None = None,
    normalize: bool = False,
) -> dict:
    """Score one clip (WAV or AEP1 embeddings) with a persisted model."""
    from .config import DEFAULT_SMOOTHING_SIGMA

    sigma = DEFAULT_SMOOTHING_SIGMA if smoothing_sigma is None else smoothing_sigma
    detector, model, extractor = load_model(model_path)
    if (wav is None) == (embeddings is None):
        raise ParameterError("provide exactly one of wav or embeddings")

    if detector == "stfpm":
        if wav is None:
            raise ConfigurationError("stfpm scores spectrograms; provide a wav input")
        spec = log_mel_spectrogram(read_wav(wav), params)
        patch, coord = stfpm_score(spec, replace(extractor, kind="reference"), model)
    else:
        if wav is not None:
            if extractor.kind != "reference":
                raise ConfigurationError(
                    "model was fitted on imported embeddings; provide --embeddings"
                )
            spec = log_mel_spectrogram(read_wav(wav), params)
            pyramid = ReferenceExtractor(extractor).extract(spec)
            selected = extractor.selected_levels
        else:
            pyramid = import_embeddings(embeddings)
            selected = extractor.selected_levels or pyramid.level_names
        grid = align_and_concat(pyramid, selected)
        patch = padim_score(grid, model) if detector == "padim" else patchcore_score(grid, model)
        coord = grid.coord

    tf_map = postprocess(patch, coord, sigma, normalize=normalize, detector=detector)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = name or (Path(wav or embeddings).stem + ".map")
    npy_path = out / f"{stem}.npy"
    pgm_path = out / f"{stem}.pgm"
    np.save(npy_path, tf_map.values.astype(np.float32))
    write_pgm(pgm_path, to_byte_image(tf_map.values))
    return {
        "sample_score": sample_score(tf_map, sample_reduce, sample_top_k),
        "map_npy": str(npy_path),
        "map_pgm": str(pgm_path),
        "shape": list(tf_map.values.shape),
        "detector": detector,
    }


def render_report(
    report_json: str,
    out_dir: str,
    formats: tuple[str, ...] = ("csv", "json"),
    corpus_dir: str | None = None,
    maps_dir: str | None = None,
    detectors: tuple[str, ...] = (),
) -> dict:
    """Re-render a stored report (and optionally heatmaps from stored maps)."""
    from .bench.heatmaps import emit_heatmaps
    from .detectors import AnomalyMap
    from .metrics import MetricsReport

    report = MetricsReport.from_json(Path(report_json).read_text())
    written = report.write(out_dir, formats=formats)
    heatmaps: list[str] = []
    if corpus_dir and maps_dir:
        corpus = Path(corpus_dir)
        manifest = DatasetManifest.load(corpus / "manifest.json")
        names = detectors or tuple(sorted({r.method for r in report.rows}))
        by_detector = {}
        for det in names:
            det_maps = {}
            for clip in manifest.test_clips():
                path = Path(maps_dir) / det / f"{clip.clip_id}.npy"
                if path.exists():
                    det_maps[clip.clip_id] = AnomalyMap(
                        np.load(path).astype(np.float64), detector=det, sample_id=clip.clip_id
                    )
            if det_maps:
                by_detector[det] = det_maps
        heatmaps = emit_heatmaps(manifest, corpus, by_detector, Path(out_dir) / "heatmaps")
    return {"written": written, "heatmaps": heatmaps}
