"""FastAPI service wrapping the full pipeline.

User-facing errors (SonomalyError) map to HTTP 400 with a structured body;
anything unexpected surfaces as 500. All filesystem paths are server-local.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..audio import SpectrogramParams
from ..bench import CorpusConfig, DatasetManifest, ExperimentConfig, build_corpus, run_experiment
from ..bench.experiment import evaluate_stored_maps
from ..detectors.stfpm import StfpmConfig
from ..errors import SonomalyError
from ..features import ExtractorSpec
from ..metrics import MetricsReport
from .. import pipeline
from . import schemas


def _params(model: schemas.SpectrogramParamsModel | None) -> SpectrogramParams | None:
    if model is None:
        return None
    return SpectrogramParams(**model.model_dump())


def _extractor(model: schemas.ExtractorModel) -> ExtractorSpec:
    return ExtractorSpec(
        kind=model.kind,
        seed=model.seed,
        channels_per_block=tuple(model.channels_per_block),
        selected_levels=tuple(model.selected_levels),
    )


def _stfpm(model: schemas.StfpmModel) -> StfpmConfig:
    return StfpmConfig(**model.model_dump())


def _rows(report: MetricsReport) -> list[schemas.ReportRowModel]:
    out = []
    for row in report.rows:
        d = {k: (None if isinstance(v, float) and math.isnan(v) else v) for k, v in vars(row).items()}
        out.append(schemas.ReportRowModel(**d))
    return out


def create_app() -> FastAPI:
    app = FastAPI(title="sonomaly", version=__version__)

    @app.exception_handler(SonomalyError)
    async def user_error_handler(request: Request, exc: SonomalyError):
        return JSONResponse(
            status_code=400,
            content=schemas.ErrorResponse(error=type(exc).__name__, message=str(exc)).model_dump(),
        )

    @app.get("/health")
    def health():
        return {"status": "ok", "version": __version__}

    @app.post("/mix", response_model=schemas.MixResponse)
    def mix(req: schemas.MixRequest):
        return pipeline.mix_files(
            req.background_wav,
            req.anomaly_wav,
            req.snr_db,
            req.t_start_sample,
            req.out_dir,
            req.name,
            req.anomaly_id,
        )

    @app.post("/spectrogram", response_model=schemas.SpectrogramResponse)
    def spectrogram(req: schemas.SpectrogramRequest):
        return pipeline.spectrogram_file(req.wav, req.out_dir, req.name, _params(req.params))

    @app.post("/extract", response_model=schemas.ExtractResponse)
    def extract(req: schemas.ExtractRequest):
        return pipeline.extract_file(
            req.wav,
            req.spectrogram_npy,
            req.out_dir,
            _extractor(req.extractor),
            req.name,
            _params(req.params),
            req.sample_rate,
        )

    @app.post("/fit", response_model=schemas.FitResponse)
    def fit(req: schemas.FitRequest):
        cfg = ExperimentConfig(
            detectors=(req.detector,),
            extractor=_extractor(req.extractor),
            embeddings_dir=req.embeddings_dir,
            padim_epsilon=req.epsilon,
            coreset_fraction=req.coreset_fraction,
            stfpm=_stfpm(req.stfpm),
        )
        return pipeline.fit_from_corpus(req.corpus_dir, req.detector, req.out_dir, cfg, req.name)

    @app.post("/score", response_model=schemas.ScoreResponse)
    def score(req: schemas.ScoreRequest):
        return pipeline.score_input(
            req.model_path,
            req.out_dir,
            wav=req.wav,
            embeddings=req.embeddings,
            name=req.name,
            smoothing_sigma=req.smoothing_sigma,
            sample_reduce=req.sample_reduce,
            sample_top_k=req.sample_top_k,
            params=_params(req.params),
            normalize=req.normalize,
        )

    @app.post("/eval", response_model=schemas.ReportResponse)
    def eval_maps(req: schemas.EvalRequest):
        corpus = Path(req.corpus_dir)
        manifest = DatasetManifest.load(corpus / "manifest.json")
        cfg = ExperimentConfig(detectors=tuple(req.detectors), **req.metrics.model_dump())
        report = evaluate_stored_maps(
            manifest,
            corpus,
            req.maps_dir,
            tuple(req.detectors),
            cfg,
            req.out_dir,
            models_dir=req.models_dir,
        )
        out = Path(req.out_dir)
        return schemas.ReportResponse(
            report_csv=str(out / "report.csv"),
            report_json=str(out / "report.json"),
            rows=_rows(report),
            diagnostics=list(report.metadata.get("diagnostics", [])),
        )

    @app.post("/bench", response_model=schemas.BenchResponse)
    def bench(req: schemas.BenchRequest):
        out = Path(req.out_dir)
        corpus_dir = out / "corpus"
        run_dir = out / "run"
        corpus_kwargs = req.corpus.model_dump()
        corpus_kwargs["spectrogram"] = SpectrogramParams(**corpus_kwargs["spectrogram"])
        for key in ("snr_levels", "background_kinds", "anomaly_kinds", "anomaly_duration_range"):
            corpus_kwargs[key] = tuple(corpus_kwargs[key])
        corpus_cfg = CorpusConfig(**corpus_kwargs)
        exp_cfg = ExperimentConfig(
            detectors=tuple(req.detectors),
            extractor=_extractor(req.extractor),
            padim_epsilon=req.epsilon,
            coreset_fraction=req.coreset_fraction,
            stfpm=_stfpm(req.stfpm),
            emit_heatmaps=req.emit_heatmaps,
            jobs=req.jobs,
            **req.metrics.model_dump(),
        )
        out.mkdir(parents=True, exist_ok=True)
        # echo the fully resolved configuration for provenance
        (out / "config.json").write_text(
            json.dumps(
                {"seed": req.seed, "corpus": corpus_cfg.to_dict(), "experiment": exp_cfg.to_dict()},
                indent=2,
                sort_keys=True,
            )
            + "\n"
        )
        manifest = build_corpus(corpus_cfg, req.seed, corpus_dir)
        report = run_experiment(manifest, corpus_dir, exp_cfg, run_dir)
        return schemas.BenchResponse(
            corpus_dir=str(corpus_dir),
            run_dir=str(run_dir),
            report_csv=str(run_dir / "report.csv"),
            report_json=str(run_dir / "report.json"),
            rows=_rows(report),
            diagnostics=list(report.metadata.get("diagnostics", [])),
        )

    @app.post("/report", response_model=schemas.RenderResponse)
    def report(req: schemas.RenderRequest):
        return pipeline.render_report(
            req.report_json,
            req.out_dir,
            tuple(req.formats),
            req.corpus_dir,
            req.maps_dir,
            tuple(req.detectors),
        )

    return app


app = create_app()
