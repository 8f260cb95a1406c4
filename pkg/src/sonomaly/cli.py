"""Command-line client for the sonomaly service.

Every subcommand builds a request, prints the fully resolved configuration
(defaults and seeds included), then posts it to the service: in-process by
default, or to a remote instance via --server. Exit codes: 0 success,
1 user error, 2 internal error.
"""

from __future__ import annotations

import argparse
import asyncio
import json
import sys

from .config import (
    DEFAULT_CHANNELS_PER_BLOCK,
    DEFAULT_CORESET_FRACTION,
    DEFAULT_EXTRACTOR_SEED,
    DEFAULT_FMAX,
    DEFAULT_FMIN,
    DEFAULT_HOP,
    DEFAULT_LOG_OFFSET,
    DEFAULT_N_FFT,
    DEFAULT_N_MELS,
    DEFAULT_PADIM_EPSILON,
    DEFAULT_SAMPLE_RATE,
    DEFAULT_SAMPLE_REDUCE,
    DEFAULT_SMOOTHING_SIGMA,
    DEFAULT_STFPM_BATCH,
    DEFAULT_STFPM_LR,
    DEFAULT_STFPM_MOMENTUM,
    DEFAULT_STFPM_STEPS,
)

DETECTORS = ("padim", "patchcore", "stfpm")


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; the CLI contract wants 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(1)


def _fmt(parser_cls=argparse.ArgumentDefaultsHelpFormatter):
    return {"formatter_class": parser_cls}


def call_service(server: str | None, path: str, payload: dict) -> tuple[int, dict]:
    """POST to a remote server, or run the request through the in-process app."""
    import httpx

    if server:
        try:
            resp = httpx.post(server.rstrip("/") + path, json=payload, timeout=None)
            return resp.status_code, resp.json()
        except httpx.HTTPError as exc:
            return 599, {"error": "TransportError", "message": str(exc)}

    from .service.app import app

    async def _go():
        transport = httpx.ASGITransport(app=app)
        async with httpx.AsyncClient(
            transport=transport, base_url="http://sonomaly.internal", timeout=None
        ) as client:
            resp = await client.post(path, json=payload)
            return resp.status_code, resp.json()

    return asyncio.run(_go())


def _spect_params(args) -> dict:
    return {
        "n_fft": args.n_fft,
        "hop": args.hop,
        "n_mels": args.n_mels,
        "fmin": args.fmin,
        "fmax": args.fmax,
        "log_offset": args.log_offset,
    }


def _add_spect_flags(p):
    p.add_argument("--n-fft", type=int, default=DEFAULT_N_FFT, help="samples per STFT frame")
    p.add_argument("--hop", type=int, default=DEFAULT_HOP, help="samples between frames")
    p.add_argument("--n-mels", type=int, default=DEFAULT_N_MELS, help="mel band count")
    p.add_argument("--fmin", type=float, default=DEFAULT_FMIN, help="lowest mel edge in Hz")
    p.add_argument("--fmax", type=float, default=DEFAULT_FMAX, help="highest mel edge in Hz")
    p.add_argument("--log-offset", type=float, default=DEFAULT_LOG_OFFSET, help="log stabilizer")


def _extractor_payload(args) -> dict:
    return {
        "kind": getattr(args, "extractor_kind", "reference"),
        "seed": args.extractor_seed,
        "channels_per_block": [int(c) for c in args.channels.split(",") if c],
        "selected_levels": [s for s in args.levels.split(",") if s],
    }


def _add_extractor_flags(p):
    p.add_argument("--extractor-seed", type=int, default=DEFAULT_EXTRACTOR_SEED,
                   help="seed of the frozen reference extractor")
    p.add_argument("--channels", default=",".join(str(c) for c in DEFAULT_CHANNELS_PER_BLOCK),
                   help="comma-separated conv block widths")
    p.add_argument("--levels", default="", help="comma-separated level names (default: all)")


def build_parser() -> _Parser:
    parser = _Parser(prog="sonomaly", description=__doc__, **_fmt())
    parser.add_argument("--server", default=None, help="remote service URL (default: in-process)")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    p = sub.add_parser("mix", help="inject an anomaly clip into a background at a target SNR", **_fmt())
    p.add_argument("--background", required=True, help="background WAV path")
    p.add_argument("--anomaly", required=True, help="anomaly WAV path")
    p.add_argument("--snr", type=float, required=True, help="target SNR in dB over the overlap")
    p.add_argument("--t-start", type=int, default=0, help="injection offset in samples")
    p.add_argument("--anomaly-id", default="anomaly", help="label stored in the record")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--name", default="mixed.wav", help="output WAV filename")

    p = sub.add_parser("spectrogram", help="compute a log-mel spectrogram (.npy)", **_fmt())
    p.add_argument("--wav", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--name", default=None, help="output filename (default: <stem>.npy)")
    _add_spect_flags(p)

    p = sub.add_parser("extract", help="emit AEP1 embeddings with the reference extractor", **_fmt())
    p.add_argument("--wav", default=None, help="input WAV (or use --spectrogram)")
    p.add_argument("--spectrogram", default=None, help="input spectrogram .npy")
    p.add_argument("--sample-rate", type=int, default=DEFAULT_SAMPLE_RATE,
                   help="sample rate for .npy inputs")
    p.add_argument("--out", required=True)
    p.add_argument("--name", default=None, help="output filename (default: <stem>.aep1)")
    _add_extractor_flags(p)
    _add_spect_flags(p)

    p = sub.add_parser("fit", help="fit a detector on a corpus' training split", **_fmt())
    p.add_argument("--corpus", required=True, help="corpus directory with manifest.json")
    p.add_argument("--detector", required=True, choices=DETECTORS)
    p.add_argument("--out", required=True)
    p.add_argument("--name", default=None, help="model filename (default: <detector>.avdm)")
    p.add_argument("--epsilon", type=float, default=DEFAULT_PADIM_EPSILON, help="padim covariance regularizer")
    p.add_argument("--coreset-fraction", type=float, default=DEFAULT_CORESET_FRACTION,
                   help="patchcore coreset fraction")
    p.add_argument("--steps", type=int, default=DEFAULT_STFPM_STEPS, help="stfpm training steps")
    p.add_argument("--lr", type=float, default=DEFAULT_STFPM_LR, help="stfpm learning rate")
    p.add_argument("--momentum", type=float, default=DEFAULT_STFPM_MOMENTUM, help="stfpm momentum")
    p.add_argument("--batch-size", type=int, default=DEFAULT_STFPM_BATCH, help="stfpm batch size")
    p.add_argument("--seed", type=int, default=0, help="stfpm training seed")
    p.add_argument("--embeddings-dir", default=None, help="AEP1 dir for imported extractors")
    p.add_argument("--extractor-kind", default="reference", choices=("reference", "imported"))
    _add_extractor_flags(p)

    p = sub.add_parser("score", help="score one clip with a fitted model", **_fmt())
    p.add_argument("--model", required=True, help="AVDM model file")
    p.add_argument("--wav", default=None, help="input WAV (or use --embeddings)")
    p.add_argument("--embeddings", default=None, help="input AEP1 embeddings")
    p.add_argument("--out", required=True)
    p.add_argument("--name", default=None, help="output stem (default: <stem>.map)")
    p.add_argument("--sigma", type=float, default=DEFAULT_SMOOTHING_SIGMA, help="map smoothing sigma")
    p.add_argument("--reduce", default=DEFAULT_SAMPLE_REDUCE, choices=("max", "mean", "topk_mean"),
                   help="map-to-score reduction")
    p.add_argument("--top-k", type=int, default=10, help="k for topk_mean")
    p.add_argument("--normalize", action="store_true", help="store the map min-max normalized")
    _add_spect_flags(p)

    p = sub.add_parser("eval", help="recompute metrics from stored maps", **_fmt())
    p.add_argument("--corpus", required=True)
    p.add_argument("--maps", required=True, help="maps directory from a previous run")
    p.add_argument("--detector", default=",".join(DETECTORS),
                   help="comma-separated detector names")
    p.add_argument("--out", required=True)
    p.add_argument("--models-dir", default=None,
                   help="models directory; enables faithfulness columns")
    p.add_argument("--sigma", type=float, default=DEFAULT_SMOOTHING_SIGMA)
    p.add_argument("--reduce", default=DEFAULT_SAMPLE_REDUCE, choices=("max", "mean", "topk_mean"))

    p = sub.add_parser("bench", help="build a corpus and run the full experiment", **_fmt())
    p.add_argument("--seed", type=int, default=7, help="corpus seed")
    p.add_argument("--out", required=True)
    p.add_argument("--config", default=None, help="JSON config file (flags override it)")
    p.add_argument("--detector", default=",".join(DETECTORS), help="comma-separated detector names")
    p.add_argument("--snr", default="6,0,-6", help="comma-separated SNR levels in dB")
    p.add_argument("--n-train", type=int, default=40)
    p.add_argument("--n-test-normal", type=int, default=20)
    p.add_argument("--n-test-anomalous", type=int, default=20, help="per SNR level")
    p.add_argument("--duration", type=float, default=4.0, help="clip length in seconds")
    p.add_argument("--anomaly-duration", default="0.5,1.5",
                   help="comma-separated LO,HI anomaly length range in seconds")
    p.add_argument("--sample-rate", type=int, default=DEFAULT_SAMPLE_RATE)
    p.add_argument("--epsilon", type=float, default=DEFAULT_PADIM_EPSILON)
    p.add_argument("--coreset-fraction", type=float, default=DEFAULT_CORESET_FRACTION)
    p.add_argument("--steps", type=int, default=DEFAULT_STFPM_STEPS)
    p.add_argument("--lr", type=float, default=DEFAULT_STFPM_LR)
    p.add_argument("--sigma", type=float, default=DEFAULT_SMOOTHING_SIGMA)
    p.add_argument("--heatmaps", action="store_true", help="emit triptych previews")
    p.add_argument("--jobs", type=int, default=1, help="worker cap for per-clip scoring")
    _add_extractor_flags(p)
    _add_spect_flags(p)

    p = sub.add_parser("report", help="re-render CSV/JSON/heatmaps from a stored report", **_fmt())
    p.add_argument("--report-json", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--formats", default="csv,json", help="comma-separated output formats")
    p.add_argument("--corpus", default=None, help="corpus dir (enables heatmaps)")
    p.add_argument("--maps", default=None, help="maps dir (enables heatmaps)")
    p.add_argument("--detector", default="", help="restrict heatmaps to these detectors")

    p = sub.add_parser("serve", help="run the HTTP service", **_fmt())
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8787)

    return parser


def _payload(args) -> tuple[str, dict]:
    cmd = args.command
    if cmd == "mix":
        return "/mix", {
            "background_wav": args.background,
            "anomaly_wav": args.anomaly,
            "snr_db": args.snr,
            "t_start_sample": args.t_start,
            "anomaly_id": args.anomaly_id,
            "out_dir": args.out,
            "name": args.name,
        }
    if cmd == "spectrogram":
        return "/spectrogram", {
            "wav": args.wav,
            "out_dir": args.out,
            "name": args.name,
            "params": _spect_params(args),
        }
    if cmd == "extract":
        return "/extract", {
            "wav": args.wav,
            "spectrogram_npy": args.spectrogram,
            "out_dir": args.out,
            "name": args.name,
            "extractor": _extractor_payload(args),
            "params": _spect_params(args),
            "sample_rate": args.sample_rate,
        }
    if cmd == "fit":
        return "/fit", {
            "corpus_dir": args.corpus,
            "detector": args.detector,
            "out_dir": args.out,
            "name": args.name,
            "extractor": _extractor_payload(args),
            "embeddings_dir": args.embeddings_dir,
            "epsilon": args.epsilon,
            "coreset_fraction": args.coreset_fraction,
            "stfpm": {
                "steps": args.steps,
                "lr": args.lr,
                "momentum": args.momentum,
                "batch_size": args.batch_size,
                "seed": args.seed,
            },
        }
    if cmd == "score":
        return "/score", {
            "model_path": args.model,
            "wav": args.wav,
            "embeddings": args.embeddings,
            "out_dir": args.out,
            "name": args.name,
            "smoothing_sigma": args.sigma,
            "sample_reduce": args.reduce,
            "sample_top_k": args.top_k,
            "params": _spect_params(args),
            "normalize": args.normalize,
        }
    if cmd == "eval":
        return "/eval", {
            "corpus_dir": args.corpus,
            "maps_dir": args.maps,
            "detectors": [d for d in args.detector.split(",") if d],
            "out_dir": args.out,
            "models_dir": args.models_dir,
            "metrics": {"smoothing_sigma": args.sigma, "sample_reduce": args.reduce},
        }
    if cmd == "bench":
        payload = {
            "out_dir": args.out,
            "seed": args.seed,
            "detectors": [d for d in args.detector.split(",") if d],
            "corpus": {
                "n_train": args.n_train,
                "n_test_normal": args.n_test_normal,
                "n_test_anomalous": args.n_test_anomalous,
                "snr_levels": [float(s) for s in args.snr.split(",") if s],
                "duration_s": args.duration,
                "anomaly_duration_range": [float(s) for s in args.anomaly_duration.split(",") if s],
                "sample_rate": args.sample_rate,
                "spectrogram": _spect_params(args),
            },
            "extractor": _extractor_payload(args),
            "epsilon": args.epsilon,
            "coreset_fraction": args.coreset_fraction,
            "stfpm": {"steps": args.steps, "lr": args.lr},
            "metrics": {"smoothing_sigma": args.sigma},
            "emit_heatmaps": args.heatmaps,
            "jobs": args.jobs,
        }
        if args.config:
            payload = _merge_config_file(args.config, payload, build_parser())
        return "/bench", payload
    if cmd == "report":
        return "/report", {
            "report_json": args.report_json,
            "out_dir": args.out,
            "formats": [f for f in args.formats.split(",") if f],
            "corpus_dir": args.corpus,
            "maps_dir": args.maps,
            "detectors": [d for d in args.detector.split(",") if d],
        }
    raise AssertionError(f"unhandled command {cmd}")


def _merge_config_file(path: str, flag_payload: dict, parser) -> dict:
    """Config file beats defaults; explicitly different flag values beat the file."""
    with open(path) as fh:
        file_payload = json.load(fh)
    defaults_payload = _payload(parser.parse_args(["bench", "--out", flag_payload["out_dir"]]))[1]

    def merge(base, file_part, flags_part):
        out = {}
        for key in flags_part:
            if isinstance(flags_part[key], dict) and isinstance(base.get(key), dict):
                out[key] = merge(base[key], (file_part or {}).get(key, {}), flags_part[key])
            elif key in (file_part or {}) and flags_part[key] == base.get(key):
                out[key] = file_part[key]
            else:
                out[key] = flags_part[key]
        return out

    merged = merge(defaults_payload, file_payload, flag_payload)
    merged["out_dir"] = flag_payload["out_dir"]  # --out always wins
    return merged


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 1

    if args.command == "serve":
        import uvicorn

        from .service.app import app

        print(json.dumps({"command": "serve", "config": {"host": args.host, "port": args.port}}))
        uvicorn.run(app, host=args.host, port=args.port)
        return 0

    path, payload = _payload(args)
    resolved = {"command": args.command, "server": args.server or "(in-process)", "config": payload}
    print(json.dumps(resolved, indent=2, sort_keys=True))

    status, body = call_service(args.server, path, payload)
    print(json.dumps(body, indent=2, sort_keys=True))
    if 200 <= status < 300:
        return 0
    if 400 <= status < 500:
        return 1
    return 2


if __name__ == "__main__":
    sys.exit(main())
